"""
Markov chains: Glauber, down-up walks, SimDownUp, bipartite blocks, censoring.
"""

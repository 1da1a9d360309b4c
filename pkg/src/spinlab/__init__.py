"""
spinlab - exact oracles, Markov chains and couplings for multi-spin systems
"""

__version__ = "0.1.0"

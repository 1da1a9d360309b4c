"""
Spin systems, graphs and the shared domain types.
"""

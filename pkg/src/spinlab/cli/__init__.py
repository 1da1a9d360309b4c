"""
Command line interface for spinlab.
"""

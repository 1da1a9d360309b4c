"""
Balanced degree partitions and their verifiers.
"""

"""
Exact enumeration oracle: distributions, transition matrices and spectra.
"""

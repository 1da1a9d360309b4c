"""
Self-avoiding walk trees and recursive couplings.
"""

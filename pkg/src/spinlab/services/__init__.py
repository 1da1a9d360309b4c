"""
Service layer for spinlab experiments.
"""

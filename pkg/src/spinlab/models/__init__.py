"""
Pydantic schemas for model files, manifests and reports.
"""

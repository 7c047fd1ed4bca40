"""
Core computational modules for the restriction laboratory.
"""

"""
Command-line front end for the restriction laboratory.
"""

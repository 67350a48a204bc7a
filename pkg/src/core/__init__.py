"""
Numerics and shared services for the LQG lab.
"""

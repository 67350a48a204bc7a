"""
Experiment harness: configuration, execution, persistence and rendering.
"""

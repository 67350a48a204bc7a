"""
Gradio viewer components for the LQG lab.
"""

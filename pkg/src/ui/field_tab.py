"""
Field tab UI component.
"""

import gradio as gr

from core.grf import circle_average, sample_whole_plane_gff, sample_zero_boundary_gff
from harness.render import render_field
from ui.utils import error_status, figure_path, format_status

GRID_SIZES = [64, 128, 256, 512]


def sample_field_figure(grid_size, boundary, seed):
    """
    Sample a field and render its heat map

    Args:
        grid_size: Lattice side N
        boundary: "whole_plane" or "zero"
        seed: Integer seed

    Returns:
        tuple: (PNG path or None, status message)
    """
    try:
        grid_size = int(grid_size)
        if boundary == "zero":
            field = sample_zero_boundary_gff(grid_size, seed=int(seed))
        else:
            field = sample_whole_plane_gff(grid_size, seed=int(seed))
        image = render_field(field, figure_path("field"))
        unit = circle_average(field, field.center, 1.0)
        return str(image), format_status(
            f"SUCCESS: N = {grid_size}, std {field.values.std():.3f}, unit-circle average {unit:.2e}"
        )
    except Exception as e:
        return None, error_status(e)


def create_field_tab():
    """
    Create the Field tab

    Returns:
        gradio.Blocks: The field tab component
    """
    with gr.Blocks() as field_tab:
        with gr.Row():
            with gr.Column(scale=1):
                gr.Markdown("## Gaussian free field")
                grid_size = gr.Dropdown(label="Grid size", choices=GRID_SIZES, value=128)
                boundary = gr.Radio(label="Boundary", choices=["whole_plane", "zero"], value="whole_plane")
                seed = gr.Number(label="Seed", value=0, precision=0)
                sample_btn = gr.Button("Sample Field", variant="primary")
                status = gr.Textbox(label="Status", value="", interactive=False)

            with gr.Column(scale=2):
                image = gr.Image(label="Field", type="filepath", interactive=False)

        sample_btn.click(fn=sample_field_figure, inputs=[grid_size, boundary, seed], outputs=[image, status])

    return field_tab

"""
SLE tab UI component.
"""

import gradio as gr

from core.crossings import max_crossings_over_grid
from core.loewner import chordal_trace, sample_driving, whole_plane_trace_from_driving
from harness.experiments import trace_region
from harness.render import render_trace
from ui.utils import error_status, figure_path, format_status

ALPHA = 1.2


def trace_figure(kappa, horizon, dt, variant, seed, epsilon=0):
    """
    Sample a driving function and render the resulting trace

    Args:
        kappa: SLE parameter
        horizon: Capacity time of the trace
        dt: Time step
        variant: "chordal" or "whole_plane"
        seed: Integer seed
        epsilon: Outer annulus radius; when positive the most-crossed annulus is drawn

    Returns:
        tuple: (PNG path or None, status message)
    """
    try:
        horizon, dt = float(horizon), float(dt)
        driving = sample_driving(float(kappa), horizon, dt, int(seed))
        if variant == "whole_plane":
            trace = whole_plane_trace_from_driving(driving)
        else:
            trace = chordal_trace(driving)

        annuli = []
        message = f"SUCCESS: {len(trace)} points, diameter {trace.diameter:.4g}"
        epsilon = float(epsilon or 0)
        if epsilon > 0:
            region = trace_region(variant, horizon, dt)
            report = max_crossings_over_grid(trace, epsilon, ALPHA, region, epsilon / 2.0)
            if report.argmax_center is not None:
                annuli.append((report.argmax_center, report.r_in, epsilon))
            message += f", max crossings {report.max_count}"

        image = render_trace(trace, figure_path("trace"), annuli)
        return str(image), format_status(message)
    except Exception as e:
        return None, error_status(e)


def create_sle_tab():
    """
    Create the SLE tab

    Returns:
        gradio.Blocks: The SLE tab component
    """
    with gr.Blocks() as sle_tab:
        with gr.Row():
            with gr.Column(scale=1):
                gr.Markdown("## Loewner trace")
                kappa = gr.Slider(label="kappa", minimum=0.0, maximum=8.0, value=6.0, step=0.1)
                horizon = gr.Number(label="Horizon", value=0.05)
                dt = gr.Number(label="dt", value=1e-4)
                variant = gr.Radio(label="Variant", choices=["chordal", "whole_plane"], value="chordal")
                seed = gr.Number(label="Seed", value=0, precision=0)
                epsilon = gr.Number(label="Annulus epsilon (0 = none)", value=0)
                trace_btn = gr.Button("Draw Trace", variant="primary")
                status = gr.Textbox(label="Status", value="", interactive=False)

            with gr.Column(scale=2):
                image = gr.Image(label="Trace", type="filepath", interactive=False)

        trace_btn.click(fn=trace_figure, inputs=[kappa, horizon, dt, variant, seed, epsilon], outputs=[image, status])

    return sle_tab

"""
Metric ball tab UI component.
"""

import gradio as gr

from core.grf import sample_whole_plane_gff
from core.lfpp import build_metric_graph, geodesic_fan, metric_ball, nearest_vertex, shortest_path_tree
from harness.experiments import default_ball_radius
from harness.render import render_ball
from ui.utils import error_status, figure_path, format_status


def ball_figure(grid_size, xi, radius, seed):
    """
    Grow an LFPP metric ball around the grid centre and render it with its geodesic fan

    Args:
        grid_size: Lattice side N
        xi: LFPP weight exponent
        radius: Metric radius, 0 for the largest ball inside the central disk
        seed: Integer seed

    Returns:
        tuple: (PNG path or None, status message)
    """
    try:
        field = sample_whole_plane_gff(int(grid_size), seed=int(seed))
        graph = build_metric_graph(field, float(xi))
        center = nearest_vertex(graph, field.center)
        radius = float(radius)
        if radius <= 0:
            radius = default_ball_radius(graph, shortest_path_tree(graph, center).distances, center)
        ball = metric_ball(graph, center, radius)
        fan = geodesic_fan(graph, ball)
        image = render_ball(
            graph.positions(ball.members), ball.member_distances, figure_path("ball"), [p.vertices for p in fan]
        )
        return str(image), format_status(
            f"SUCCESS: radius {radius:.4g}, {len(ball.members)} vertices, {len(ball.boundary)} on the boundary"
        )
    except Exception as e:
        return None, error_status(e)


def create_ball_tab():
    """
    Create the Metric ball tab

    Returns:
        gradio.Blocks: The ball tab component
    """
    with gr.Blocks() as ball_tab:
        with gr.Row():
            with gr.Column(scale=1):
                gr.Markdown("## LFPP metric ball")
                grid_size = gr.Dropdown(label="Grid size", choices=[64, 128, 256], value=128)
                xi = gr.Slider(label="xi", minimum=0.05, maximum=1.0, value=0.41, step=0.01)
                radius = gr.Number(label="Radius (0 = automatic)", value=0)
                seed = gr.Number(label="Seed", value=0, precision=0)
                grow_btn = gr.Button("Grow Ball", variant="primary")
                status = gr.Textbox(label="Status", value="", interactive=False)

            with gr.Column(scale=2):
                image = gr.Image(label="Ball and geodesic fan", type="filepath", interactive=False)

        grow_btn.click(fn=ball_figure, inputs=[grid_size, xi, radius, seed], outputs=[image, status])

    return ball_tab

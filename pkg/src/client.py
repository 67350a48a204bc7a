"""
LQG lab - Gradio viewer UI
"""

import traceback

import gradio as gr

from core.config import VIEWER_PORT, logger
from ui.ball_tab import create_ball_tab
from ui.field_tab import create_field_tab
from ui.runs_tab import create_runs_tab
from ui.sle_tab import create_sle_tab


def create_ui():
    """Create the Gradio UI"""
    with gr.Blocks(title="LQG lab") as demo:
        gr.Markdown("# LQG lab")
        gr.Markdown("Lattice fields, LFPP metric balls and Loewner traces. Batch runs from `lab` show up under Runs.")

        with gr.Tab("Field"):
            create_field_tab()

        with gr.Tab("Metric ball"):
            create_ball_tab()

        with gr.Tab("SLE"):
            create_sle_tab()

        with gr.Tab("Runs"):
            create_runs_tab()

    return demo


if __name__ == "__main__":
    logger.info(f"Starting lab viewer on port {VIEWER_PORT}")
    try:
        create_ui().queue().launch(
            server_name="127.0.0.1",
            server_port=VIEWER_PORT,
            share=False,
            show_error=True,
        )
    except Exception as e:
        logger.error(f"Error launching viewer: {e}")
        traceback.print_exc()

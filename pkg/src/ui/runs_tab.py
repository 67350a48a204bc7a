"""
Runs tab UI component: browse manifests and figures written by `lab`.
"""

import gradio as gr

from ui.utils import error_status, list_runs, load_run


def show_run(name):
    """
    Load a run for display

    Args:
        name: Run directory name

    Returns:
        tuple: (manifest dict, list of PNG paths, status message)
    """
    try:
        manifest, images = load_run(name)
        return manifest, images, ""
    except Exception as e:
        return {}, [], error_status(e)


def create_runs_tab():
    """
    Create the Runs tab

    Returns:
        gradio.Blocks: The runs tab component
    """
    with gr.Blocks() as runs_tab:
        with gr.Row():
            run_name = gr.Dropdown(label="Run", choices=list_runs(), value=None)
            refresh_btn = gr.Button("Refresh Runs 🔄", size="sm", min_width=50)
        status = gr.Textbox(label="Status", value="", interactive=False)
        with gr.Row():
            with gr.Column(scale=1):
                manifest = gr.JSON(label="Manifest")
            with gr.Column(scale=2):
                gallery = gr.Gallery(label="Figures")

        refresh_btn.click(fn=lambda: gr.update(choices=list_runs()), inputs=[], outputs=[run_name])
        run_name.change(fn=show_run, inputs=[run_name], outputs=[manifest, gallery, status])

    return runs_tab

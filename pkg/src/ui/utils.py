"""
Utility functions for the UI components.
"""

import tempfile
from pathlib import Path

from core.config import FIGURES_DIR, RUNS_DIR
from core.errors import LabError
from core.storage import read_json


def format_status(message):
    """
    Format status message with emoji indicators

    Args:
        message: Status message

    Returns:
        str: Formatted status message
    """
    if message.startswith("SUCCESS:"):
        return f"✅ {message}"
    elif message.startswith("ERROR:"):
        return f"❌ {message}"
    else:
        return message


def error_status(error):
    """
    Status line for a failed lab call

    Args:
        error: The exception raised by the lab

    Returns:
        str: Formatted status message
    """
    if isinstance(error, LabError):
        return format_status(f"ERROR: {type(error).__name__}: {error}")
    return format_status(f"ERROR: {str(error)}")


def figure_path(stem):
    """
    Fresh PNG path under the figures directory

    Args:
        stem: File name prefix

    Returns:
        Path: Path of a not yet existing PNG file
    """
    FIGURES_DIR.mkdir(exist_ok=True)
    handle = tempfile.NamedTemporaryFile(prefix=f"{stem}_", suffix=".png", dir=FIGURES_DIR, delete=False)
    handle.close()
    return Path(handle.name)


def list_runs():
    """
    List finished runs, newest first

    Returns:
        list: Names of run directories that hold a manifest
    """
    if not RUNS_DIR.exists():
        return []
    runs = [p for p in RUNS_DIR.iterdir() if (p / "manifest.json").exists()]
    return [p.name for p in sorted(runs, key=lambda p: p.stat().st_mtime, reverse=True)]


def load_run(name):
    """
    Load a run's manifest and its PNG outputs

    Args:
        name: Run directory name under runs/

    Returns:
        tuple: (manifest dict, list of PNG paths)
    """
    if not name:
        return {}, []
    run_dir = RUNS_DIR / name
    manifest = read_json(run_dir / "manifest.json")
    images = [str(run_dir / entry["file"]) for entry in manifest.get("outputs", []) if entry["file"].endswith(".png")]
    return manifest, images

"""
Configuration settings for the LQG geodesics lab.
"""

import logging
import math
import os
from pathlib import Path

# Configure logging
logging.basicConfig(
    level=os.environ.get("LAB_LOG_LEVEL", "INFO").upper(),
    format="%(asctime)s - %(name)s - %(levelname)s - %(message)s",
)
logger = logging.getLogger("lqg_lab")

TOOL_VERSION = "lqg-lab 0.3.0"

# Directory constants
RUNS_DIR = Path("runs")
FIGURES_DIR = Path("figures")

# Ensure directories exist
RUNS_DIR.mkdir(exist_ok=True)
FIGURES_DIR.mkdir(exist_ok=True)

# Local viewer port
VIEWER_PORT = int(os.environ.get("LAB_VIEWER_PORT", "7890"))

# Worker pool cap
LAB_THREADS = int(os.environ.get("LAB_THREADS", "0")) or (os.cpu_count() or 1)

# Numerical tolerances shared across modules
HARMONIC_SOLVER_RTOL = 1e-12
HARMONIC_RESIDUAL_TOL = 1e-10
TIE_RTOL = 1e-12
LOEWNER_DENOMINATOR_TOL = 1e-12
WALKER_MAX_STEPS = 10**6

# Experiment default settings
DEFAULT_EXPERIMENT_SETTINGS = {
    "grid_size": 256,
    "xi": 0.41,
    "gamma": math.sqrt(8.0 / 3.0),
    "kappa": 6.0,
    "epsilon_list": [0.5, 0.25, 0.125],
    "alpha": 1.2,
    "K": 3,
    "M": 4.0,
    "c": 16.0,
    "dt": 1e-4,
    "horizon": 0.05,
    "replicas": 1,
    "seed": 0,
    "boundary": "whole_plane",
    "sle_variant": "chordal",
    "path_source": "geodesic",
    "num_pairs": 8,
    "delta_list": [0.1, 0.25, 0.5],
    "max_depth": 6,
    "walkers_per_cube": 16,
    "stride": 1,
}

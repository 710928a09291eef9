"""
Configuration Module
===================

Handles loading of environment variables and the numerical defaults used
across the package. Values can be overridden from a `.env` file.
"""

import os
from dotenv import load_dotenv
from typing import Dict, Any

# Load environment variables
load_dotenv()

# Run configuration
SEED = int(os.getenv("STREAM_OT_SEED", "0"))
LOG_LEVEL = os.getenv("STREAM_OT_LOG_LEVEL", "INFO").upper()
OUTPUT_DIR = os.getenv("STREAM_OT_OUTPUT_DIR", "results")
TRIGGER_N = int(os.getenv("STREAM_OT_TRIGGER_N", "1000"))

# Evaluation grids
GRID_SIZE = 256
PROBE_SIZE = 16
PILOT_SAMPLES = 1024
OBJECTIVE_SAMPLES = 512

# Numerical constants
PRUNE_RATIO = 1e-14
NNLS_ITERATION_FACTOR = 3
SINKHORN_TOL = 1e-10
SINKHORN_MAX_ITERS = 10_000
DENSE_COST_LIMIT = 4096
CHUNK_ENTRIES = 2 ** 22
WEIGHT_SLACK = 1e-6
LOG_UNDERFLOW = -700.0

# Cell-wise Fourier compression of potentials
CELL_ATOMS = 512
MIN_CELL_FREQUENCIES = 8
TILT_CURVATURE_MIN = 0.1
TILT_CURVATURE_MAX = 10.0

# A compression is rejected when its sup error exceeds this multiple of the update's own variation
COMPRESSION_ERROR_RATIO = 1.0
# Smallest error bound, for updates that barely move the potentials
COMPRESSION_ERROR_FLOOR = 1e-10

# Fit defaults
FIT_MIN_POINTS = 8

# Trace CSV schema, frozen
TRACE_COLUMNS = (
    "t", "N", "support_f", "support_g",
    "err_succ_var", "dual_obj", "comp_sup_err", "wall_ms",
)


def get_config() -> Dict[str, Any]:
    """
    Get the environment-driven configuration as a dictionary.

    Returns:
        Dict containing all configuration settings
    """
    return {
        "seed": SEED,
        "log_level": LOG_LEVEL,
        "output_dir": OUTPUT_DIR,
        "trigger_n": TRIGGER_N,
        "grid_size": GRID_SIZE,
        "probe_size": PROBE_SIZE,
        "prune_ratio": PRUNE_RATIO,
        "nnls_iteration_factor": NNLS_ITERATION_FACTOR,
        "sinkhorn_tol": SINKHORN_TOL,
    }


def seed_fallback() -> int:
    """
    Seed used when neither a config file nor a flag sets one.

    Reads the environment at call time so tests can patch it.
    """
    return int(os.getenv("STREAM_OT_SEED", str(SEED)))

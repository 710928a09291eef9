"""
Utility Functions
================

Provides helper functions for the application including:
- Terminal output formatting
- Logging setup
- Evaluation and probe grids built from sample bounding boxes
"""

import sys
import logging
from typing import Optional, Tuple

import numpy as np

# Try to import termcolor for colored terminal output
try:
    from termcolor import colored
except ImportError:
    # Define a dummy colored function if termcolor is not installed
    def colored(text, *args, **kwargs):
        return text

from stream_ot.config import settings
from stream_ot.core.sampling import low_discrepancy_points


_LEVEL_COLORS = {
    "DEBUG": ("cyan", []),
    "INFO": ("green", []),
    "WARNING": ("yellow", []),
    "ERROR": ("red", []),
    "CRITICAL": ("red", ["bold"]),
}


def setup_logging(level: Optional[str] = None):
    """
    Configure logging for the application with colored output.

    Args:
        level: Level name; defaults to STREAM_OT_LOG_LEVEL

    Returns:
        The logging module, configured
    """
    level_name = (level or settings.LOG_LEVEL).upper()
    logging.basicConfig(
        level=getattr(logging, level_name, logging.INFO),
        format="%(asctime)s - %(levelname)s - %(message)s",
        stream=sys.stdout,
        force=True,
    )

    # Enhance logging with colored output
    original_factory = logging.getLogRecordFactory()

    def colored_record_factory(*args, **kwargs):
        record = original_factory(*args, **kwargs)
        color, attrs = _LEVEL_COLORS.get(record.levelname, (None, []))
        if color:
            record.levelname = colored(record.levelname, color, attrs=attrs)
        return record

    # Avoid stacking factories when called twice in one process
    if not getattr(original_factory, "_stream_ot", False):
        colored_record_factory._stream_ot = True
        logging.setLogRecordFactory(colored_record_factory)

    return logging


def format_terminal_header(title: str, subtitle: str = ""):
    """
    Print a banner for terminal output.

    Args:
        title: Main line, e.g. the subcommand
        subtitle: Short description of the configuration

    Returns:
        None (prints to terminal)
    """
    border = colored("=" * 69, "blue")
    print(border)
    heading = colored(f"stream_ot | {title}", "cyan", attrs=["bold"])
    if subtitle:
        print(f"{heading} - {colored(subtitle, 'yellow')}")
    else:
        print(heading)
    print(border)


def bounding_box(points: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """Per-coordinate (low, high) of a point cloud of shape (n, d)."""
    points = np.atleast_2d(np.asarray(points, dtype=float))
    return points.min(axis=0), points.max(axis=0)


def evaluation_grid(points: np.ndarray, size: int = settings.GRID_SIZE) -> np.ndarray:
    """
    Grid on which variational norms are measured.

    A regular grid of `size` points in 1D; `size` low-discrepancy points in
    the bounding box otherwise.

    Args:
        points: Sample whose bounding box defines the grid, shape (n, d)
        size: Number of grid points

    Returns:
        Array of shape (size, d)
    """
    low, high = bounding_box(points)
    if low.shape[0] == 1:
        return np.linspace(low[0], high[0], size)[:, None]
    return _box_points(low, high, size)


def probe_grid(points: np.ndarray, size: int = settings.PROBE_SIZE) -> np.ndarray:
    """Low-discrepancy probe points in the bounding box of `points`."""
    low, high = bounding_box(points)
    return _box_points(low, high, size)


def _box_points(low: np.ndarray, high: np.ndarray, size: int) -> np.ndarray:
    unit = low_discrepancy_points(size, low.shape[0])
    return low[None, :] + unit * (high - low)[None, :]

"""
Trace Fitting
=============

Log-log slope fits over trace windows and OS/COS run comparisons.
"""

import logging
from dataclasses import dataclass
from typing import Optional, Tuple

import numpy as np
from scipy import stats

from stream_ot.config import settings
from stream_ot.core.online_sinkhorn import Trace
from stream_ot.errors import ConfigurationError, InsufficientDataError


@dataclass(frozen=True)
class SlopeFit:
    slope: float
    stderr: float
    intercept: float
    points: int
    window: Tuple[float, float]


@dataclass(frozen=True)
class RunComparison:
    """
    COS / OS ratios at the largest N both runs reach.

    Attributes:
        N: Matched sample count
        error_ratio: err_succ_var(cos) / err_succ_var(os)
        time_ratio: wall_ms(cos) / wall_ms(os)
        support_ratio: support_f(cos) / support_f(os)
    """

    N: float
    error_ratio: float
    time_ratio: float
    support_ratio: float

    def line(self) -> str:
        return (
            f"N={self.N:.0f} error_ratio={self.error_ratio:.4f} "
            f"time_ratio={self.time_ratio:.4f} support_ratio={self.support_ratio:.4f}"
        )


def default_window(N: np.ndarray, min_points: int = settings.FIT_MIN_POINTS) -> Tuple[float, float]:
    """The last decade of N, widened to hold at least min_points rows."""
    N = np.sort(np.asarray(N, dtype=float))
    high = N[-1]
    low = high / 10.0
    if np.count_nonzero(N >= low) < min_points:
        low = N[max(0, N.shape[0] - min_points)]
    return float(low), float(high)


def fit_loglog_slope(trace: Trace, metric_column: str = "err_succ_var",
                     N_min: Optional[float] = None, N_max: Optional[float] = None,
                     min_points: int = 5) -> SlopeFit:
    """
    Ordinary least squares of log(metric) on log(N) inside a window.

    Rows where the metric is missing are skipped.

    Args:
        trace: Trace to fit
        metric_column: Trace field to fit
        N_min: Lower window edge; the last decade by default
        N_max: Upper window edge; the largest N by default
        min_points: Minimum rows inside the window

    Returns:
        SlopeFit with the slope and its standard error
    """
    N = trace.column("N")
    metric = trace.column(metric_column)
    present = ~np.isnan(metric)
    N, metric = N[present], metric[present]
    if N.size == 0:
        raise InsufficientDataError(f"trace has no '{metric_column}' values")

    if N_min is None or N_max is None:
        low, high = default_window(N)
        N_min = low if N_min is None else N_min
        N_max = high if N_max is None else N_max
    inside = (N >= N_min) & (N <= N_max)
    if np.count_nonzero(inside) < min_points:
        raise InsufficientDataError(
            f"{np.count_nonzero(inside)} rows in N window [{N_min:g}, {N_max:g}], need {min_points}"
        )
    values = metric[inside]
    if np.any(values <= 0):
        raise ConfigurationError(f"'{metric_column}' must be positive inside the fit window")

    fit = stats.linregress(np.log(N[inside]), np.log(values))
    logging.debug(f"Fitted slope {fit.slope:.4f} +- {fit.stderr:.4f} on {np.count_nonzero(inside)} rows")
    return SlopeFit(
        slope=float(fit.slope),
        stderr=float(fit.stderr),
        intercept=float(fit.intercept),
        points=int(np.count_nonzero(inside)),
        window=(float(N_min), float(N_max)),
    )


def _at(trace: Trace, column: str, log_n: float) -> float:
    return float(np.interp(log_n, np.log(trace.column("N")), trace.column(column)))


def compare_runs(trace_os: Trace, trace_cos: Trace) -> RunComparison:
    """
    Error, time and support ratios at the largest common N.

    Values are interpolated linearly in log N.

    Args:
        trace_os: Uncompressed run
        trace_cos: Compressed run

    Returns:
        RunComparison
    """
    if len(trace_os) == 0 or len(trace_cos) == 0:
        raise InsufficientDataError("both traces need at least one row")
    n_os, n_cos = trace_os.column("N"), trace_cos.column("N")
    common = min(n_os[-1], n_cos[-1])
    if common < max(n_os[0], n_cos[0]):
        raise ConfigurationError(
            f"traces do not overlap in N: [{n_os[0]:g}, {n_os[-1]:g}] vs [{n_cos[0]:g}, {n_cos[-1]:g}]"
        )
    log_n = float(np.log(common))

    def ratio(column: str) -> float:
        base = _at(trace_os, column, log_n)
        return _at(trace_cos, column, log_n) / base if base != 0 else float("nan")

    return RunComparison(
        N=float(common),
        error_ratio=ratio("err_succ_var"),
        time_ratio=ratio("wall_ms"),
        support_ratio=ratio("support_f"),
    )


def relative_objective_error(trace: Trace, reference: float) -> np.ndarray:
    """|F_t - F_ref| / |F_ref| for every row."""
    if reference == 0:
        raise ConfigurationError("reference objective must be nonzero for a relative error")
    return np.abs(trace.column("dual_obj") - reference) / abs(reference)

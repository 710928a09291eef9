"""
Experiment Orchestration
========================

Runs one configured experiment, persists its trace as CSV and builds the
one-line summary printed by `stream_ot run`.
"""

import csv
import logging
import os
from dataclasses import dataclass, replace
from numbers import Integral
from typing import Any, List, Optional

from stream_ot.analysis.fitting import RunComparison, compare_runs, fit_loglog_slope, relative_objective_error
from stream_ot.analysis.rates import theoretical_rates
from stream_ot.config import settings
from stream_ot.config.run_config import RunConfig
from stream_ot.core.compressed_online import run_compressed
from stream_ot.core.discrete_sinkhorn import ReferenceValue, reference_dual_value
from stream_ot.core.online_sinkhorn import RunResult, Trace, TraceRow, run_online_sinkhorn
from stream_ot.errors import InsufficientDataError, TraceIOError

_INT_COLUMNS = ("t", "N", "support_f", "support_g")


@dataclass(eq=False)
class ExperimentOutcome:
    """
    Attributes:
        config: The configuration that ran
        trace_path: Where the main trace was written
        summary: One-line summary
        result: Main run
        reference: Reference value, when requested
        comparison: OS/COS comparison, when requested
        baseline_path: Trace of the uncompressed run of a comparison
    """

    config: RunConfig
    trace_path: str
    summary: str
    result: RunResult
    reference: Optional[ReferenceValue] = None
    comparison: Optional[RunComparison] = None
    baseline_path: Optional[str] = None


# ----------------------------------------
#  TRACE FILES
# ----------------------------------------
def _format(value: Any) -> str:
    if value is None:
        return ""
    if isinstance(value, Integral) and not isinstance(value, bool):
        return str(value)
    return repr(float(value))


def write_trace_csv(trace: Trace, path: str) -> str:
    """
    Write the frozen trace columns; missing values are empty fields.

    Args:
        trace: Trace to write
        path: Destination; parent directories are created

    Returns:
        The path written
    """
    try:
        parent = os.path.dirname(path)
        if parent:
            os.makedirs(parent, exist_ok=True)
        with open(path, "w", encoding="utf-8", newline="") as handle:
            writer = csv.writer(handle, lineterminator="\n")
            writer.writerow(settings.TRACE_COLUMNS)
            for row in trace:
                record = row.as_record()
                writer.writerow([_format(record[name]) for name in settings.TRACE_COLUMNS])
    except OSError as e:
        raise TraceIOError(f"cannot write trace: {e.strerror}", path)
    logging.info(f"Trace written to {path} ({len(trace)} rows)")
    return path


def read_trace_csv(path: str) -> Trace:
    """
    Read a trace written by write_trace_csv.

    Raises:
        TraceIOError: If the file is unreadable or its header is not the trace schema
    """
    try:
        with open(path, "r", encoding="utf-8", newline="") as handle:
            reader = csv.reader(handle)
            header = next(reader, None)
            if header is None or tuple(header) != settings.TRACE_COLUMNS:
                raise TraceIOError(f"unexpected trace header {header}", path)
            rows: List[TraceRow] = []
            for line_no, fields_ in enumerate(reader, start=2):
                if len(fields_) != len(settings.TRACE_COLUMNS):
                    raise TraceIOError(f"line {line_no} has {len(fields_)} fields", path)
                record = dict(zip(settings.TRACE_COLUMNS, fields_))
                values = {
                    name: (int(text) if name in _INT_COLUMNS else float(text)) if text != "" else None
                    for name, text in record.items()
                }
                rows.append(TraceRow(**values))
    except TraceIOError:
        raise
    except OSError as e:
        raise TraceIOError(f"cannot read trace: {e.strerror}", path)
    except ValueError as e:
        raise TraceIOError(f"malformed trace value: {e}", path)
    return Trace(rows, meta={"path": path})


# ----------------------------------------
#  RUNS
# ----------------------------------------
def _execute(cfg: RunConfig, algo: str, compress: str) -> RunResult:
    alpha, beta = cfg.distributions()
    sched = cfg.schedule()
    budget = {"T": cfg.iterations} if cfg.iterations is not None else {"N_max": cfg.n_max}
    if algo == "os":
        return run_online_sinkhorn(alpha, beta, sched, seed=cfg.seed, **budget)
    compression = replace(cfg, compress=compress).compression(alpha.dimension)
    return run_compressed(alpha, beta, sched, compression, seed=cfg.seed, **budget)


def summary_line(cfg: RunConfig, trace: Trace, reference: Optional[ReferenceValue] = None,
                 comparison: Optional[RunComparison] = None) -> str:
    """One line of key=value pairs describing a finished run."""
    rates = theoretical_rates(cfg.a, cfg.b)
    parts = [
        f"experiment={cfg.label}",
        f"algo={cfg.algo}",
        f"compress={cfg.compress}",
        f"seed={cfg.seed}",
        f"N={trace.last.N}",
        f"support_f={trace.last.support_f}",
        f"err_succ_var={trace.last.err_succ_var:.6e}",
        f"theoretical_rate={float(rates.new_rate):.4f}",
    ]
    try:
        fit = fit_loglog_slope(trace)
        parts.append(f"fitted_slope={fit.slope:.4f}")
        parts.append(f"slope_stderr={fit.stderr:.4f}")
    except InsufficientDataError as e:
        logging.warning(f"No slope fit: {e}")
        parts.append("fitted_slope=nan")
    if "compression_events" in trace.meta:
        parts.append(f"compressions={trace.meta['compression_events']}")
        parts.append(f"compression_failures={trace.meta['compression_failures']}")
        if trace.meta.get("degraded"):
            parts.append("degraded_to=os")
    if reference is not None:
        rel = relative_objective_error(trace, reference.value)[-1]
        parts.append(f"reference={reference.value:.8f}")
        parts.append(f"relative_objective_error={rel:.4e}")
    if comparison is not None:
        parts.append(comparison.line())
    return " ".join(parts)


def run_experiment(cfg: RunConfig) -> ExperimentOutcome:
    """
    Run one configured experiment and write its trace.

    With cfg.compare the uncompressed run on the same seed is written next
    to the main trace with an `.os.csv` suffix and compared against it.

    Args:
        cfg: Validated configuration

    Returns:
        ExperimentOutcome with the summary line
    """
    reference = None
    if cfg.reference_n:
        alpha, beta = cfg.distributions()
        reference = reference_dual_value(alpha, beta, cfg.epsilon, cfg.reference_n, cfg.seed)

    algo = "cos" if cfg.compare else cfg.algo
    result = _execute(cfg, algo, cfg.compress)
    path = write_trace_csv(result.trace, cfg.trace_path())

    comparison = None
    baseline_path = None
    if cfg.compare:
        baseline = _execute(cfg, "os", "none")
        baseline_path = write_trace_csv(baseline.trace, os.path.splitext(path)[0] + ".os.csv")
        comparison = compare_runs(baseline.trace, result.trace)

    summary = summary_line(replace(cfg, algo=algo), result.trace, reference, comparison)
    return ExperimentOutcome(config=cfg, trace_path=path, summary=summary, result=result,
                             reference=reference, comparison=comparison, baseline_path=baseline_path)

"""
Compressed Online Sinkhorn
==========================

Online Sinkhorn whose potentials are compressed after each update once
enough samples have been seen, so that the supports stay O(m_t) instead of
growing like the cumulative sample count.

u = exp(-f/eps) is compressed first, then v against the freshly compressed u.
The Fourier method works cell by cell on the log-weights of each potential;
Gaussian quadrature compresses the measure weighted by phi = v.
"""

import logging
from dataclasses import dataclass, replace
from typing import Optional, Tuple

import numpy as np
from scipy import stats

from stream_ot.config import settings
from stream_ot.core.compression import (
    CompressionResult,
    compression_error_probe,
    fourier_compress_potential,
    gq_compress,
    measure_to_potential,
    potential_to_measure,
)
from stream_ot.core.compression.cells import cell_count, cell_size_limit
from stream_ot.core.online_sinkhorn import (
    RunResult,
    RunState,
    Schedule,
    Trace,
    drive,
    os_step,
    resolve_iterations,
    start_run,
)
from stream_ot.core.potentials import DualPair, Potential, variational_norm
from stream_ot.core.sampling import DistributionSpec
from stream_ot.errors import (
    ConfigurationError,
    InsufficientDataError,
    RepresentationCorruptionError,
    RepresentationEmptyError,
    ScalingError,
)
from stream_ot.utils.helpers import probe_grid

COMPRESSION_METHODS = ("none", "fourier", "gq")

# supports above this multiple of m_t are logged
OVERSIZE_FACTOR = 10


@dataclass(frozen=True)
class CompressionConfig:
    """
    Attributes:
        method: "none", "fourier" or "gq"
        zeta: Compression regularity; m_t = ceil((t+1)^((a-b)/zeta))
        trigger_N: Compress once this many samples per side have been drawn
        every: Compress every `every` iterations after the trigger
        dimension: Problem dimension, checked against the method when given
    """

    method: str = "fourier"
    zeta: float = 1.0
    trigger_N: int = settings.TRIGGER_N
    every: int = 1
    dimension: Optional[int] = None

    def __post_init__(self):
        if self.method not in COMPRESSION_METHODS:
            raise ConfigurationError(
                f"unknown compression method '{self.method}' (known: {', '.join(COMPRESSION_METHODS)})"
            )
        if not self.zeta > 0:
            raise ConfigurationError(f"zeta must be positive, got {self.zeta}")
        if int(self.trigger_N) < 1:
            raise ConfigurationError(f"trigger_N must be at least 1, got {self.trigger_N}")
        if int(self.every) < 1:
            raise ConfigurationError(f"compression cadence must be at least 1, got {self.every}")
        if self.method == "gq" and self.dimension is not None and self.dimension != 1:
            raise ConfigurationError(f"Gaussian quadrature compression needs d = 1, got d = {self.dimension}")


@dataclass(frozen=True)
class DecayReport:
    """Fitted decay of recorded compression errors against m_t."""

    slope: float
    stderr: float
    events: int
    min_error: float


def _compress_side(u: Potential, v: Potential, m: int, method: str) -> Tuple[Potential, CompressionResult]:
    if method == "fourier":
        u_hat, result = fourier_compress_potential(u, m)
        return (u, result) if result.no_op else (u_hat, result)
    v_values = v(u.atoms)
    mu = potential_to_measure(u, v, v_values)
    result = gq_compress(mu, m)
    if result.no_op or not result.converged:
        return u, result
    return measure_to_potential(result.measure, v, u.epsilon), result


def _reject(nxt: RunState, counters: dict, key: str) -> RunState:
    counters["compression_failures"] = counters.get("compression_failures", 0) + 1
    counters[key] = counters.get(key, 0) + 1
    return replace(nxt, counters=counters)


def cos_step(state: RunState, sched: Schedule, cfg: CompressionConfig,
             probe_x: Optional[np.ndarray] = None, probe_y: Optional[np.ndarray] = None) -> RunState:
    """
    One online update followed, past the trigger, by compression of both potentials.

    A compression is kept only when its error on the check points stays
    within COMPRESSION_ERROR_RATIO times the variation of the update itself;
    otherwise the uncompressed potentials carry on and a failure is counted.

    Args:
        state: State after iteration t - 1
        sched: Schedule (gives eta_t, b_t and m_t)
        cfg: Compression configuration
        probe_x: Points on which f-side errors are measured; drawn from the
            bounding box of the source atoms when omitted
        probe_y: Same for the g side and the target atoms

    Returns:
        New RunState with m_t and comp_sup_err set when compression fired
    """
    # 1. Online update on the current (possibly compressed) supports
    nxt = os_step(state, sched)
    if cfg.method == "none" or state.n_t < cfg.trigger_N or nxt.t % cfg.every != 0:
        return nxt

    m = sched.compression_size(nxt.t)
    pair = nxt.pair
    if m >= pair.f.size and m >= pair.g.size:
        return nxt

    counters = dict(nxt.counters)
    try:
        # 2. u_{t+1} against phi = v_{t+1}
        f_hat, res_f = _compress_side(pair.f, pair.g, m, cfg.method) if m < pair.f.size else (pair.f, None)
        # 3. v_{t+1} against phi = the compressed u
        g_hat, res_g = _compress_side(pair.g, f_hat, m, cfg.method) if m < pair.g.size else (pair.g, None)
    except (ScalingError, RepresentationCorruptionError, RepresentationEmptyError) as e:
        logging.warning(f"Compression skipped at t={nxt.t}: {e}")
        return _reject(nxt, counters, "compression_errors")

    results = [r for r in (res_f, res_g) if r is not None]
    if any(not r.converged for r in results):
        logging.warning(f"Compression failed at t={nxt.t}; keeping the uncompressed potentials")
        return _reject(nxt, counters, "compression_errors")

    # 4. Error check against the movement of the update
    if probe_x is None:
        probe_x = probe_grid(pair.g.atoms)
    if probe_y is None:
        probe_y = probe_grid(pair.f.atoms)
    err = compression_error_probe(pair.f, f_hat, probe_x)
    err_g = compression_error_probe(pair.g, g_hat, probe_y)
    movement = max(variational_norm(pair.f(probe_x) - state.pair.f(probe_x)),
                   variational_norm(pair.g(probe_y) - state.pair.g(probe_y)))
    allowed = max(settings.COMPRESSION_ERROR_RATIO * movement, settings.COMPRESSION_ERROR_FLOOR)
    if max(err, err_g) > allowed:
        logging.warning(
            f"Compression rejected at t={nxt.t}: errors ({err:.3e}, {err_g:.3e}) exceed {allowed:.3e}, "
            f"{settings.COMPRESSION_ERROR_RATIO:g} x the update's variation"
        )
        return _reject(nxt, counters, "rejected_compressions")

    counters["compression_events"] = counters.get("compression_events", 0) + 1
    if max(f_hat.size, g_hat.size) > OVERSIZE_FACTOR * m:
        counters["oversize_events"] = counters.get("oversize_events", 0) + 1
        logging.info(
            f"Compressed supports ({f_hat.size}, {g_hat.size}) exceed {OVERSIZE_FACTOR} x m_t = {OVERSIZE_FACTOR * m}"
        )
    logging.debug(
        f"t={nxt.t}: compressed ({pair.f.size}, {pair.g.size}) -> ({f_hat.size}, {g_hat.size}) "
        f"with m_t={m}, sup errors ({err:.3e}, {err_g:.3e})"
    )
    return replace(nxt, pair=DualPair(f_hat, g_hat), m_t=m, comp_sup_err=err, counters=counters)


def compressed_step_cost(sched: Schedule, t: int, support: int, method: str = "fourier",
                         probes: int = settings.PROBE_SIZE) -> int:
    """
    Modelled kernel and moment evaluations of one compressed step.

    Counts the online update on supports of size `support`, the work of
    compressing both sides with `method` and the error check, taking the
    compressed size equal to the incoming support.

    Args:
        sched: Schedule
        t: Iteration index
        support: Compressed support entering the step
        method: "fourier" or "gq"
        probes: Check points per side

    Returns:
        Number of evaluations
    """
    if t < 1:
        raise ConfigurationError(f"iteration index must be at least 1, got {t}")
    if method not in ("fourier", "gq"):
        raise ConfigurationError(f"no cost model for compression method '{method}'")
    b = sched.batch_size(t)
    m = sched.compression_size(t)
    n = support + b
    online = b * support + b * n
    if method == "fourier":
        # each cell sees its share of the frequencies
        cells = cell_count(n, cell_size_limit(n, m))
        compression = 2 * m * n // cells
    else:
        weighting = n * n + support * n
        rebuild = support * n + support * support
        compression = weighting + 2 * m * n + rebuild
    check = probes * (4 * n + 4 * support)
    return online + compression + check


def run_compressed(alpha: DistributionSpec, beta: DistributionSpec, sched: Schedule,
                   cfg: CompressionConfig, T: Optional[int] = None, N_max: Optional[int] = None,
                   seed: Optional[int] = None, reference: Optional[DualPair] = None) -> RunResult:
    """
    Compressed online Sinkhorn.

    With cfg.method == "none" this draws the same samples and performs the
    same arithmetic as run_online_sinkhorn.

    Args:
        alpha: Source distribution
        beta: Target distribution
        sched: Schedule
        cfg: Compression configuration
        T: Number of iterations (exclusive with N_max)
        N_max: Sample budget per side (exclusive with T)
        seed: Random seed; STREAM_OT_SEED when omitted
        reference: Optional converged pair for the true-error column

    Returns:
        RunResult; trace.meta carries the event counters and a `degraded` flag,
        set when compression was attempted but never kept
    """
    if cfg.method == "gq" and alpha.dimension != 1:
        raise ConfigurationError(f"Gaussian quadrature compression needs d = 1, got d = {alpha.dimension}")
    iterations = resolve_iterations(sched, T, N_max)
    state, grids, seed = start_run(alpha, beta, sched, seed)
    logging.info(
        f"Compressed online Sinkhorn ({cfg.method}): {iterations} iterations, eps={sched.epsilon}, "
        f"a={sched.a}, b={sched.b}, zeta={cfg.zeta}, trigger={cfg.trigger_N}, seed={seed}"
    )
    meta = {"algo": "cos", "compress": cfg.method, "seed": seed, "epsilon": sched.epsilon,
            "a": sched.a, "b": sched.b, "zeta": cfg.zeta, "trigger_N": cfg.trigger_N}

    def step(s: RunState) -> RunState:
        return cos_step(s, sched, cfg, grids.probe_x, grids.probe_y)

    result = drive(state, step, iterations, grids, reference, meta)
    counters = result.state.counters
    result.trace.meta.update({
        "compression_events": counters.get("compression_events", 0),
        "compression_failures": counters.get("compression_failures", 0),
        "rejected_compressions": counters.get("rejected_compressions", 0),
        "oversize_events": counters.get("oversize_events", 0),
    })
    failures = counters.get("compression_failures", 0)
    degraded = cfg.method != "none" and failures > 0 and counters.get("compression_events", 0) == 0
    result.trace.meta["degraded"] = degraded
    if degraded:
        logging.warning(
            f"No compression was kept in {failures} attempt(s): this run is plain online Sinkhorn "
            f"with supports growing to {result.trace.last.support_f}"
        )
    elif failures:
        logging.warning(f"{failures} compression(s) failed during the run")
    logging.info(
        f"Compressed run finished at N={result.trace.last.N}, supports "
        f"({result.trace.last.support_f}, {result.trace.last.support_g}), {result.state.wall_ms:.0f} ms"
    )
    return result


def compression_decay_monitor(trace: Trace, min_events: int = 4) -> DecayReport:
    """
    Log-log slope of the recorded compression errors against m_t.

    Args:
        trace: Trace of a compressed run
        min_events: Minimum number of compression events

    Returns:
        DecayReport

    Raises:
        InsufficientDataError: With fewer than min_events usable events
    """
    events = [row for row in trace.compression_events() if row.m_t is not None]
    if len(events) < min_events:
        raise InsufficientDataError(
            f"need at least {min_events} compression events with a known m_t, trace has {len(events)}"
        )
    m = np.array([row.m_t for row in events], dtype=float)
    err = np.array([row.comp_sup_err for row in events], dtype=float)
    min_error = float(err.min())
    positive = err > 0
    if positive.sum() < min_events or np.unique(m[positive]).size < 2:
        raise InsufficientDataError(
            f"only {int(positive.sum())} compression events have a positive error; the floor is {min_error:.3e}"
        )
    fit = stats.linregress(np.log(m[positive]), np.log(err[positive]))
    return DecayReport(slope=float(fit.slope), stderr=float(fit.stderr),
                       events=len(events), min_error=min_error)

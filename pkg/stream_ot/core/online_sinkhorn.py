"""
Online Sinkhorn
===============

Streaming Sinkhorn with growing-support potentials.

Each iteration draws a fresh batch on both sides and forms the convex
combination

    exp(-f_{t+1}/eps) = (1 - eta_t) exp(-f_t/eps) + eta_t * mean_j exp((g_t(y_j) - C(., y_j))/eps)

entirely in the log domain: old log-weights move by eps*log(1 - eta_t) and
the batch is appended with log-weights eps*log(eta_t/b_t) + g_t(y_j). The
g side is then updated the same way from the new f.
"""

import logging
import math
import time
from dataclasses import dataclass, field, replace
from typing import Any, Callable, Dict, Iterator, List, Optional, Protocol, Tuple

import numpy as np

from stream_ot.config import settings
from stream_ot.core.potentials import (
    KERNEL_COUNTER,
    CostSpec,
    DualPair,
    Potential,
    as_points,
    dual_objective,
    variational_norm,
)
from stream_ot.core.sampling import DistributionSpec, RngState, sample
from stream_ot.errors import AlignmentError, ConfigurationError, ScheduleError
from stream_ot.utils.helpers import evaluation_grid, probe_grid

# guards ceil() against (t+1)**p landing a hair above an integer
_CEIL_SLACK = 1e-9


# ----------------------------------------
#  SCHEDULE
# ----------------------------------------
@dataclass(frozen=True)
class Schedule:
    """
    Learning-rate, batch-size and compression-size schedule.

    eta_t = (t+1)^b, b_t = ceil((t+1)^(2a)), m_t = ceil((t+1)^((a-b)/zeta))

    Attributes:
        a: Batch growth exponent
        b: Learning-rate exponent, in (-1, -1/2)
        epsilon: Entropic regularisation
        zeta: Compression regularity (only used by compressed runs)
    """

    a: float
    b: float
    epsilon: float
    zeta: float = 1.0

    def __post_init__(self):
        validate_schedule(self.a, self.b, self.epsilon, self.zeta)

    def eta(self, t: int) -> float:
        return float((t + 1) ** self.b)

    def batch_size(self, t: int) -> int:
        return max(1, math.ceil((t + 1) ** (2.0 * self.a) - _CEIL_SLACK))

    def compression_size(self, t: int) -> int:
        return max(1, math.ceil((t + 1) ** ((self.a - self.b) / self.zeta) - _CEIL_SLACK))

    def cumulative_samples(self, t: int) -> int:
        """N(t) = sum of b_i for i = 0..t, the initial batch included."""
        return sum(self.batch_size(i) for i in range(t + 1))


def validate_schedule(a: float, b: float, epsilon: float, zeta: float = 1.0):
    """
    Reject parameters that break the convergence conditions.

    Each violated condition has its own message.

    Raises:
        ScheduleError: If a condition on (a, b, zeta) fails
        ConfigurationError: If epsilon is not positive
    """
    if not epsilon > 0:
        raise ConfigurationError(f"epsilon must be positive, got {epsilon}")
    if not b > -1.0:
        raise ScheduleError(
            f"Assumption 2 violated (step-size divergence): b must be > -1 so that sum eta_t diverges, got b={b}"
        )
    if not b < -0.5:
        raise ScheduleError(
            f"Assumption 2 violated (step-size summability): b must be < -1/2 so that sum eta_t^2 converges, got b={b}"
        )
    if not a - b > 1.0:
        raise ScheduleError(
            f"Assumption 3 violated (batch growth): a - b <= 1, but sum eta_t/sqrt(b_t) converges only "
            f"for a - b > 1; got a - b = {a - b:g}"
        )
    if not zeta > 0:
        raise ScheduleError(f"compression regularity violated: zeta must be positive, got zeta={zeta}")


def per_iteration_cost(sched: Schedule, t: int) -> Tuple[int, int]:
    """
    Kernel evaluations and memory of iteration t.

    n_t counts the atoms added by iterations 1..t; the step touches
    n_t * b_t kernel entries and keeps n_t atoms per side.

    Returns:
        Tuple (flops_estimate, memory_estimate)
    """
    if t < 1:
        raise ConfigurationError(f"iteration index must be at least 1, got {t}")
    n_t = sum(sched.batch_size(s) for s in range(1, t + 1))
    return n_t * sched.batch_size(t), n_t


def iterations_for_budget(sched: Schedule, n_samples: int) -> int:
    """First iteration t at which the cumulative batch count exceeds n_samples."""
    t = 0
    total = sched.batch_size(0)
    while total <= n_samples:
        t += 1
        total += sched.batch_size(t)
    return t


# ----------------------------------------
#  SAMPLERS
# ----------------------------------------
class Sampler(Protocol):
    def draw(self, n: int) -> Tuple[np.ndarray, np.ndarray]:
        ...


class StreamSampler:
    """Fresh i.i.d. batches from alpha and beta, one random stream per side."""

    def __init__(self, alpha: DistributionSpec, beta: DistributionSpec,
                 rng_alpha: RngState, rng_beta: RngState):
        if alpha.dimension != beta.dimension:
            raise AlignmentError(
                f"alpha is {alpha.dimension}-dimensional, beta is {beta.dimension}-dimensional"
            )
        self.alpha = alpha
        self.beta = beta
        self.rng_alpha = rng_alpha
        self.rng_beta = rng_beta

    @property
    def dimension(self) -> int:
        return self.alpha.dimension

    def draw(self, n: int) -> Tuple[np.ndarray, np.ndarray]:
        return sample(self.alpha, n, self.rng_alpha), sample(self.beta, n, self.rng_beta)


class FrozenSampler:
    """Returns the same empirical support on every draw, whatever the batch size asked."""

    def __init__(self, xs, ys):
        self.xs = as_points(xs)
        self.ys = as_points(ys, self.xs.shape[1])
        if self.xs.shape[0] != self.ys.shape[0]:
            raise AlignmentError(f"{self.xs.shape[0]} source points, {self.ys.shape[0]} target points")

    @property
    def dimension(self) -> int:
        return self.xs.shape[1]

    def draw(self, n: int) -> Tuple[np.ndarray, np.ndarray]:
        return self.xs, self.ys


# ----------------------------------------
#  RUN STATE AND TRACE
# ----------------------------------------
@dataclass(frozen=True, eq=False)
class EvaluationGrids:
    """
    Fixed point sets used for run diagnostics.

    Attributes:
        grid_x, grid_y: Variational-norm grids on the source and target sides
        probe_x, probe_y: Small QMC probe sets for compression errors
        sample_x, sample_y: Held-out samples for the dual objective
    """

    grid_x: np.ndarray
    grid_y: np.ndarray
    probe_x: np.ndarray
    probe_y: np.ndarray
    sample_x: np.ndarray
    sample_y: np.ndarray

    @classmethod
    def from_points(cls, xs, ys, sample_x=None, sample_y=None) -> "EvaluationGrids":
        xs = as_points(xs)
        ys = as_points(ys, xs.shape[1])
        return cls(
            grid_x=evaluation_grid(xs),
            grid_y=evaluation_grid(ys),
            probe_x=probe_grid(xs),
            probe_y=probe_grid(ys),
            sample_x=xs if sample_x is None else as_points(sample_x, xs.shape[1]),
            sample_y=ys if sample_y is None else as_points(sample_y, xs.shape[1]),
        )


def build_grids(alpha: DistributionSpec, beta: DistributionSpec, rng: RngState) -> EvaluationGrids:
    """Grids from a pilot sample's bounding box, plus held-out objective samples."""
    pilot_x = sample(alpha, settings.PILOT_SAMPLES, rng)
    pilot_y = sample(beta, settings.PILOT_SAMPLES, rng)
    held_x = sample(alpha, settings.OBJECTIVE_SAMPLES, rng)
    held_y = sample(beta, settings.OBJECTIVE_SAMPLES, rng)
    return EvaluationGrids.from_points(pilot_x, pilot_y, held_x, held_y)


@dataclass(eq=False)
class RunState:
    """
    State of a streaming run after iteration t.

    Attributes:
        t: Last completed iteration (0 right after initialisation)
        n_t: Cumulative samples drawn per side
        pair: Current dual potentials
        sampler: Source of batches (owns the random streams)
        wall_ms: Cumulative step time in milliseconds
        m_t: Compression size of the last step, if it compressed
        comp_sup_err: Probe-grid sup error of the last compression, if any
        counters: Event counters (compressions, failures, oversize supports)
    """

    t: int
    n_t: int
    pair: DualPair
    sampler: Any
    wall_ms: float = 0.0
    m_t: Optional[int] = None
    comp_sup_err: Optional[float] = None
    counters: Dict[str, int] = field(default_factory=dict)


@dataclass
class TraceRow:
    t: int
    N: int
    support_f: int
    support_g: int
    err_succ_var: float
    dual_obj: float
    wall_ms: float
    comp_sup_err: Optional[float] = None
    m_t: Optional[int] = None
    true_err: Optional[float] = None
    kernel_evals: int = 0

    def as_record(self) -> Dict[str, Any]:
        """The frozen CSV columns, in order."""
        return {name: getattr(self, name) for name in settings.TRACE_COLUMNS}


class Trace:
    """
    Per-iteration records of a run.

    Rows must arrive with strictly increasing N.
    """

    def __init__(self, rows: Optional[List[TraceRow]] = None, meta: Optional[Dict[str, Any]] = None):
        self.rows: List[TraceRow] = []
        self.meta: Dict[str, Any] = dict(meta or {})
        for row in rows or []:
            self.append(row)

    def append(self, row: TraceRow):
        if self.rows and row.N <= self.rows[-1].N:
            raise ConfigurationError(
                f"trace rows must have strictly increasing N ({row.N} after {self.rows[-1].N})"
            )
        if row.wall_ms < 0:
            raise ConfigurationError(f"wall time must be nonnegative, got {row.wall_ms}")
        self.rows.append(row)

    def __len__(self) -> int:
        return len(self.rows)

    def __iter__(self) -> Iterator[TraceRow]:
        return iter(self.rows)

    @property
    def last(self) -> TraceRow:
        if not self.rows:
            raise IndexError("trace is empty")
        return self.rows[-1]

    def column(self, name: str) -> np.ndarray:
        """Column as floats; missing values become NaN."""
        return np.array(
            [np.nan if getattr(row, name) is None else getattr(row, name) for row in self.rows],
            dtype=float,
        )

    def compression_events(self) -> List[TraceRow]:
        return [row for row in self.rows if row.comp_sup_err is not None]


@dataclass(eq=False)
class RunResult:
    """Trace plus the final potentials of a run."""

    trace: Trace
    pair: DualPair
    state: RunState


# ----------------------------------------
#  UPDATES
# ----------------------------------------
def _blend(p: Potential, atoms: np.ndarray, log_weights: np.ndarray, eta: float) -> Potential:
    if eta >= 1.0:
        # full step: the old support carries zero mass
        return Potential(p.epsilon, log_weights, atoms, p.cost)
    return p.shift(p.epsilon * math.log1p(-eta)).append(atoms, log_weights)


def online_update(pair: DualPair, xs, ys, eta: float) -> DualPair:
    """
    One log-domain online Sinkhorn update on a batch.

    eta = 1 replaces both supports by the batch, which reproduces one
    discrete Sinkhorn update when the batch is the full empirical measure.

    Args:
        pair: Current potentials (f on the source side, g on the target side)
        xs: Source batch
        ys: Target batch, same size as xs
        eta: Learning rate in (0, 1]

    Returns:
        Updated DualPair
    """
    if not 0.0 < eta <= 1.0:
        raise ScheduleError(f"learning rate must lie in (0, 1], got {eta}")
    d = pair.cost.dimension
    xs = as_points(xs, d)
    ys = as_points(ys, d)
    if xs.shape[0] != ys.shape[0]:
        raise AlignmentError(f"batch sizes differ: {xs.shape[0]} vs {ys.shape[0]}")

    eps = pair.epsilon
    log_share = eps * math.log(eta / xs.shape[0])

    # 1. f side: new atoms y_j weighted by eps*log(eta/b) + g_t(y_j)
    f_next = _blend(pair.f, ys, log_share + pair.g(ys), eta)

    # 2. g side from the just-updated f
    g_next = _blend(pair.g, xs, log_share + f_next(xs), eta)
    return DualPair(f_next, g_next)


def os_step(state: RunState, sched: Schedule) -> RunState:
    """
    Iteration t = state.t + 1 of online Sinkhorn.

    Args:
        state: State after iteration t - 1
        sched: Schedule giving eta_t and b_t

    Returns:
        New RunState; the input state is left untouched
    """
    t = state.t + 1
    eta = sched.eta(t)
    if eta >= 1.0:
        raise ScheduleError(f"learning rate eta_{t} = {eta:g} must be below 1 for a streaming step")
    xs, ys = state.sampler.draw(sched.batch_size(t))
    pair = online_update(state.pair, xs, ys, eta)
    return replace(state, t=t, n_t=state.n_t + xs.shape[0], pair=pair, m_t=None, comp_sup_err=None)


def init_state(sampler, sched: Schedule, cost: Optional[CostSpec] = None) -> RunState:
    """
    Initial potentials from the first batch, all log-weights zero.

    Args:
        sampler: Batch source
        sched: Schedule (b_0 sets the first batch size)
        cost: Ground cost; squared Euclidean in the sampler's dimension by default

    Returns:
        RunState at t = 0
    """
    cost = cost or CostSpec(sampler.dimension)
    xs, ys = sampler.draw(sched.batch_size(0))
    f = Potential(sched.epsilon, np.zeros(ys.shape[0]), ys, cost)
    g = Potential(sched.epsilon, np.zeros(xs.shape[0]), xs, cost)
    return RunState(t=0, n_t=xs.shape[0], pair=DualPair(f, g), sampler=sampler)


# ----------------------------------------
#  RUNS
# ----------------------------------------
def resolve_iterations(sched: Schedule, T: Optional[int], N_max: Optional[int]) -> int:
    """Number of iterations for exactly one of an iteration count or a sample budget."""
    if (T is None) == (N_max is None):
        raise ConfigurationError("give exactly one of an iteration count T or a sample budget N_max")
    if T is not None:
        if T < 1:
            raise ConfigurationError(f"iteration count must be at least 1, got {T}")
        return int(T)
    if N_max < 1:
        raise ConfigurationError(f"sample budget must be at least 1, got {N_max}")
    return max(1, iterations_for_budget(sched, int(N_max)))


def drive(state: RunState, step: Callable[[RunState], RunState], iterations: int,
          grids: EvaluationGrids, reference: Optional[DualPair] = None,
          meta: Optional[Dict[str, Any]] = None) -> RunResult:
    """
    Run `iterations` steps and record one trace row per step.

    Only the step itself is timed; diagnostics on the grids are not.

    Args:
        state: Initial state
        step: The update to apply (online or compressed)
        iterations: Number of steps
        grids: Diagnostic point sets
        reference: Optional converged pair for a true-error column
        meta: Run metadata stored on the trace

    Returns:
        RunResult
    """
    trace = Trace(meta=meta)
    prev_f = state.pair.f(grids.grid_x)
    prev_g = state.pair.g(grids.grid_y)
    if reference is not None:
        ref_f = reference.f(grids.grid_x)
        ref_g = reference.g(grids.grid_y)

    for _ in range(iterations):
        evals_before = KERNEL_COUNTER.count
        start = time.perf_counter()
        state = step(state)
        elapsed_ms = (time.perf_counter() - start) * 1000.0
        evals = KERNEL_COUNTER.count - evals_before
        state.wall_ms += elapsed_ms

        f_vals = state.pair.f(grids.grid_x)
        g_vals = state.pair.g(grids.grid_y)
        err = variational_norm(f_vals - prev_f) + variational_norm(g_vals - prev_g)
        true_err = None
        if reference is not None:
            true_err = variational_norm(f_vals - ref_f) + variational_norm(g_vals - ref_g)

        row = TraceRow(
            t=state.t,
            N=state.n_t,
            support_f=state.pair.f.size,
            support_g=state.pair.g.size,
            err_succ_var=err,
            dual_obj=dual_objective(state.pair, grids.sample_x, grids.sample_y),
            wall_ms=state.wall_ms,
            comp_sup_err=state.comp_sup_err,
            m_t=state.m_t,
            true_err=true_err,
            kernel_evals=evals,
        )
        trace.append(row)
        logging.debug(
            f"t={row.t} N={row.N} support=({row.support_f},{row.support_g}) "
            f"err={row.err_succ_var:.3e} obj={row.dual_obj:.6f}"
        )
        prev_f, prev_g = f_vals, g_vals

    return RunResult(trace=trace, pair=state.pair, state=state)


def start_run(alpha: DistributionSpec, beta: DistributionSpec, sched: Schedule,
              seed: Optional[int]) -> Tuple[RunState, EvaluationGrids, int]:
    """
    Seed the random streams, draw the diagnostic grids and the first batch.

    The same seed gives the same samples whatever algorithm consumes them.

    Returns:
        Tuple (initial state, grids, seed actually used)
    """
    seed = settings.seed_fallback() if seed is None else int(seed)
    rng_alpha, rng_beta, rng_pilot = RngState(seed).spawn(3)
    grids = build_grids(alpha, beta, rng_pilot)
    sampler = StreamSampler(alpha, beta, rng_alpha, rng_beta)
    return init_state(sampler, sched), grids, seed


def run_online_sinkhorn(alpha: DistributionSpec, beta: DistributionSpec, sched: Schedule,
                        T: Optional[int] = None, N_max: Optional[int] = None,
                        seed: Optional[int] = None,
                        reference: Optional[DualPair] = None) -> RunResult:
    """
    Online Sinkhorn on streaming samples of alpha and beta.

    Args:
        alpha: Source distribution
        beta: Target distribution
        sched: Schedule
        T: Number of iterations (exclusive with N_max)
        N_max: Sample budget per side (exclusive with T)
        seed: Random seed; STREAM_OT_SEED when omitted
        reference: Optional converged pair for the true-error column

    Returns:
        RunResult with the trace and final potentials
    """
    iterations = resolve_iterations(sched, T, N_max)
    state, grids, seed = start_run(alpha, beta, sched, seed)
    logging.info(
        f"Online Sinkhorn: {iterations} iterations, eps={sched.epsilon}, a={sched.a}, b={sched.b}, seed={seed}"
    )
    meta = {"algo": "os", "compress": "none", "seed": seed, "epsilon": sched.epsilon,
            "a": sched.a, "b": sched.b, "zeta": sched.zeta}
    result = drive(state, lambda s: os_step(s, sched), iterations, grids, reference, meta)
    logging.info(f"Online Sinkhorn finished at N={result.trace.last.N} in {result.state.wall_ms:.0f} ms")
    return result

"""
Discrete Sinkhorn
=================

Log-domain Sinkhorn on fixed, uniformly weighted empirical measures.
Serves as the correctness oracle for the online updates and produces the
reference objective values used in relative-error summaries.
"""

import logging
from dataclasses import dataclass
from typing import Optional, Tuple

import numpy as np
from scipy.special import logsumexp

from stream_ot.config import settings
from stream_ot.core.potentials import (
    CostSpec,
    DualPair,
    Potential,
    as_points,
    log_kernel_sums,
)
from stream_ot.core.sampling import DistributionSpec, RngState, sample
from stream_ot.errors import AlignmentError, ConfigurationError


@dataclass(frozen=True, eq=False)
class DiscreteProblem:
    """Two empirical measures of equal size n with uniform weights 1/n."""

    xs: np.ndarray
    ys: np.ndarray
    epsilon: float
    cost: CostSpec

    def __post_init__(self):
        xs = as_points(self.xs, self.cost.dimension)
        ys = as_points(self.ys, self.cost.dimension)
        if xs.shape[0] < 1:
            raise ConfigurationError("discrete problem needs at least one point")
        if xs.shape[0] != ys.shape[0]:
            raise AlignmentError(f"xs has {xs.shape[0]} points, ys has {ys.shape[0]}")
        if not (np.all(np.isfinite(xs)) and np.all(np.isfinite(ys))):
            raise ConfigurationError("discrete problem points must be finite")
        if not self.epsilon > 0:
            raise ConfigurationError(f"epsilon must be positive, got {self.epsilon}")
        object.__setattr__(self, "xs", xs)
        object.__setattr__(self, "ys", ys)
        # n x n costs are only stored for small problems
        dense = self.cost.matrix(xs, ys) if xs.shape[0] <= settings.DENSE_COST_LIMIT else None
        object.__setattr__(self, "_cost_matrix", dense)

    @property
    def n(self) -> int:
        return self.xs.shape[0]

    @property
    def log_n(self) -> float:
        return float(np.log(self.n))

    def row_sums(self, values: np.ndarray) -> np.ndarray:
        """log sum_j exp((values_j - C(x_i, y_j)) / eps), for every x_i."""
        dense = self._cost_matrix
        return log_kernel_sums(self.xs, self.ys, values / self.epsilon, self.epsilon, self.cost,
                               cost_matrix=dense)

    def column_sums(self, values: np.ndarray) -> np.ndarray:
        """log sum_i exp((values_i - C(x_i, y_j)) / eps), for every y_j."""
        dense = None if self._cost_matrix is None else self._cost_matrix.T
        return log_kernel_sums(self.ys, self.xs, values / self.epsilon, self.epsilon, self.cost,
                               cost_matrix=dense)


@dataclass(frozen=True, eq=False)
class DiscreteSolution:
    """
    Result of a discrete Sinkhorn solve.

    Attributes:
        problem: The solved problem
        f: Potential on xs, gauge-fixed so that f[0] = 0
        g: Potential on ys
        converged: Whether the successive change fell below tol
        iterations: Number of alternating updates performed
        last_change: Sup-norm change of the final update
        dual_value: Dual objective at (f, g)
    """

    problem: DiscreteProblem
    f: np.ndarray
    g: np.ndarray
    converged: bool
    iterations: int
    last_change: float
    dual_value: float

    def as_dual_pair(self) -> DualPair:
        """
        Continuous extension of the discrete potentials.

        f(x) = T_beta(g)(x) and g(y) = T_alpha(f)(y) through the atom
        representation; at the data points they reproduce the discrete
        vectors up to the solver tolerance.
        """
        prob = self.problem
        shift = prob.epsilon * prob.log_n
        f_pot = Potential(prob.epsilon, self.g - shift, prob.ys, prob.cost)
        g_pot = Potential(prob.epsilon, self.f - shift, prob.xs, prob.cost)
        return DualPair(f_pot, g_pot)


@dataclass(frozen=True)
class ReferenceValue:
    """Reference dual objective with the metadata needed to reproduce it."""

    value: float
    converged: bool
    n_ref: int
    seed: int
    iterations: int


def sinkhorn_step(f: np.ndarray, g: np.ndarray, prob: DiscreteProblem) -> Tuple[np.ndarray, np.ndarray]:
    """
    One alternating Sinkhorn update, f first then g from the new f.

    Args:
        f: Current potential on xs (unused by the update, kept for symmetry)
        g: Current potential on ys
        prob: The discrete problem

    Returns:
        Tuple (f_next, g_next)
    """
    eps = prob.epsilon
    f_next = -eps * (prob.row_sums(np.asarray(g, dtype=float)) - prob.log_n)
    g_next = -eps * (prob.column_sums(f_next) - prob.log_n)
    return f_next, g_next


def discrete_dual_value(f: np.ndarray, g: np.ndarray, prob: DiscreteProblem) -> float:
    """Dual objective of discrete potentials under uniform weights."""
    eps = prob.epsilon
    log_mass = logsumexp(f / eps + prob.row_sums(g)) - 2.0 * prob.log_n
    return float(np.mean(f) + np.mean(g) - eps * np.exp(log_mass))


def marginal_errors(solution: DiscreteSolution) -> Tuple[float, float]:
    """
    Total-variation errors of the two marginals of the implied plan.

    Returns:
        Tuple (row_error, column_error)
    """
    prob = solution.problem
    eps = prob.epsilon
    target = 1.0 / prob.n
    rows = np.exp(solution.f / eps + prob.row_sums(solution.g) - 2.0 * prob.log_n)
    cols = np.exp(solution.g / eps + prob.column_sums(solution.f) - 2.0 * prob.log_n)
    return float(np.abs(rows - target).sum()), float(np.abs(cols - target).sum())


def sinkhorn_solve(prob: DiscreteProblem, tol: float = settings.SINKHORN_TOL,
                   max_iters: int = settings.SINKHORN_MAX_ITERS,
                   g_init: Optional[np.ndarray] = None) -> DiscreteSolution:
    """
    Run log-domain Sinkhorn until the sup-norm change drops below tol.

    Args:
        prob: The discrete problem
        tol: Stopping tolerance on successive potentials
        max_iters: Iteration cap; the last iterate is returned unconverged
        g_init: Optional starting potential on ys (zeros by default)

    Returns:
        DiscreteSolution with f gauge-fixed to f[0] = 0
    """
    if not tol > 0:
        raise ConfigurationError(f"tolerance must be positive, got {tol}")
    g = np.zeros(prob.n) if g_init is None else np.asarray(g_init, dtype=float).copy()
    f = np.zeros(prob.n)
    change = np.inf
    converged = False
    iterations = 0

    while iterations < max_iters:
        f_next, g_next = sinkhorn_step(f, g, prob)
        iterations += 1
        change = max(np.abs(f_next - f).max(), np.abs(g_next - g).max())
        f, g = f_next, g_next
        if change < tol:
            converged = True
            break

    if not converged:
        logging.warning(f"Discrete Sinkhorn stopped after {iterations} iterations (change {change:.3e})")
    else:
        logging.debug(f"Discrete Sinkhorn converged in {iterations} iterations")

    # gauge fixing f(x_1) = 0
    shift = f[0]
    f = f - shift
    g = g + shift
    return DiscreteSolution(
        problem=prob,
        f=f,
        g=g,
        converged=converged,
        iterations=iterations,
        last_change=float(change),
        dual_value=discrete_dual_value(f, g, prob),
    )


def reference_dual_value(alpha: DistributionSpec, beta: DistributionSpec, epsilon: float,
                         n_ref: int, seed: int, tol: float = 1e-9,
                         max_iters: int = settings.SINKHORN_MAX_ITERS) -> ReferenceValue:
    """
    Dual objective of discrete Sinkhorn on n_ref samples per side.

    Args:
        alpha: Source distribution
        beta: Target distribution
        epsilon: Regularisation
        n_ref: Samples per side (at least 256)
        seed: Sampling seed
        tol: Solver tolerance
        max_iters: Solver iteration cap

    Returns:
        ReferenceValue; `converged` carries the solver flag
    """
    if n_ref < 256:
        raise ConfigurationError(f"reference values need n_ref >= 256, got {n_ref}")
    if alpha.dimension != beta.dimension:
        raise AlignmentError("alpha and beta live in different dimensions")

    stream_a, stream_b = RngState(seed).spawn(2)
    xs = sample(alpha, n_ref, stream_a)
    ys = sample(beta, n_ref, stream_b)
    prob = DiscreteProblem(xs, ys, epsilon, CostSpec(alpha.dimension))
    logging.info(f"Computing reference value on {n_ref} samples per side (eps={epsilon})")
    solution = sinkhorn_solve(prob, tol=tol, max_iters=max_iters)
    return ReferenceValue(
        value=solution.dual_value,
        converged=solution.converged,
        n_ref=n_ref,
        seed=int(seed),
        iterations=solution.iterations,
    )

"""
Potentials
==========

Cost functions, the log-domain atom representation of dual potentials,
the soft C-transform, the variational seminorm and the dual objective.

A potential is stored as log-weights q_i and atoms y_i and evaluated as

    f(x) = -eps * log sum_i exp((q_i - C(x, y_i)) / eps)

Every reduction is a max-shifted log-sum-exp; nothing is exponentiated to
the linear domain.
"""

import threading
from dataclasses import dataclass
from typing import Optional, TYPE_CHECKING

import numpy as np
from scipy.special import logsumexp

from stream_ot.config import settings
from stream_ot.errors import (
    AlignmentError,
    ConfigurationError,
    RepresentationEmptyError,
)

if TYPE_CHECKING:
    from stream_ot.core.compression.measures import WeightedMeasure

SUPPORTED_COSTS = ("squared_euclidean",)


class KernelCounter:
    """Process-wide tally of cost and moment evaluations, used by the cost-model checks."""

    def __init__(self):
        self._lock = threading.Lock()
        self.count = 0

    def add(self, n: int):
        with self._lock:
            self.count += int(n)

    def reset(self):
        with self._lock:
            self.count = 0


KERNEL_COUNTER = KernelCounter()


def as_points(values, dimension: Optional[int] = None) -> np.ndarray:
    """
    Coerce scalars, vectors or matrices into an (n, d) float array.

    A flat vector is read as n points in 1D unless `dimension` says it is a
    single d-dimensional point.
    """
    arr = np.asarray(values, dtype=float)
    if arr.ndim == 0:
        arr = arr.reshape(1, 1)
    elif arr.ndim == 1:
        if dimension is not None and dimension > 1:
            arr = arr.reshape(1, -1)
        else:
            arr = arr[:, None]
    if dimension is not None and arr.shape[1] != dimension:
        raise AlignmentError(f"expected points of dimension {dimension}, got {arr.shape[1]}")
    return arr


def _frozen(arr: np.ndarray) -> np.ndarray:
    arr = np.array(arr, dtype=float, copy=True)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class CostSpec:
    """Ground cost between points of R^d. Only the squared Euclidean cost is supported."""

    dimension: int
    kind: str = "squared_euclidean"

    def __post_init__(self):
        if self.kind not in SUPPORTED_COSTS:
            raise ConfigurationError(
                f"unsupported cost '{self.kind}': only {', '.join(SUPPORTED_COSTS)} is available"
            )
        if int(self.dimension) < 1:
            raise ConfigurationError(f"cost dimension must be positive, got {self.dimension}")

    def matrix(self, xs, ys) -> np.ndarray:
        """
        Pairwise costs C(x_i, y_j).

        Differences are formed explicitly so that C(y, y) is exactly 0 and
        the matrix is exactly symmetric when xs and ys are swapped.
        """
        xs = as_points(xs, self.dimension)
        ys = as_points(ys, self.dimension)
        diff = xs[:, None, :] - ys[None, :, :]
        return np.einsum("ijk,ijk->ij", diff, diff)

    def __call__(self, xs, ys) -> np.ndarray:
        return self.matrix(xs, ys)

    def lipschitz_constant(self, diameter: float) -> float:
        """Lipschitz constant of x -> C(x, y) on a box of the given diameter."""
        return 2.0 * float(diameter)


def log_kernel_sums(xs, atoms, log_weights, epsilon: float, cost: CostSpec,
                    cost_matrix: Optional[np.ndarray] = None) -> np.ndarray:
    """
    Row-wise log-sum-exp of (log_weights_j - C(x_i, atoms_j) / eps).

    Rows are processed in chunks so that no more than CHUNK_ENTRIES costs
    are alive at once. Each row is reduced independently, so the result
    does not depend on the chunk size.

    Args:
        xs: Evaluation points (m, d)
        atoms: Atom positions (n, d)
        log_weights: Already eps-scaled log weights, shape (n,)
        epsilon: Regularisation
        cost: Ground cost
        cost_matrix: Optional precomputed (m, n) cost matrix

    Returns:
        Vector of length m
    """
    xs = as_points(xs, cost.dimension)
    atoms = as_points(atoms, cost.dimension)
    log_weights = np.asarray(log_weights, dtype=float)
    n = atoms.shape[0]
    if n == 0:
        raise RepresentationEmptyError("cannot evaluate a representation without atoms")
    if log_weights.shape != (n,):
        raise AlignmentError(f"{log_weights.shape[0]} weights for {n} atoms")

    m = xs.shape[0]
    KERNEL_COUNTER.add(m * n)
    if cost_matrix is not None:
        return logsumexp(log_weights[None, :] - cost_matrix / epsilon, axis=1)

    out = np.empty(m)
    rows = max(1, settings.CHUNK_ENTRIES // n)
    for start in range(0, m, rows):
        stop = min(m, start + rows)
        block = cost.matrix(xs[start:stop], atoms)
        out[start:stop] = logsumexp(log_weights[None, :] - block / epsilon, axis=1)
    return out


@dataclass(frozen=True, eq=False)
class Potential:
    """
    Log-domain sparse representation of a dual potential.

    Attributes:
        epsilon: Entropic regularisation
        weights: Log-domain weights q_i (not divided by epsilon)
        atoms: Atom positions, shape (n, d)
        cost: Ground cost
    """

    epsilon: float
    weights: np.ndarray
    atoms: np.ndarray
    cost: CostSpec

    def __post_init__(self):
        if not self.epsilon > 0:
            raise ConfigurationError(f"epsilon must be positive, got {self.epsilon}")
        if np.size(self.atoms):
            atoms = as_points(self.atoms, self.cost.dimension)
        else:
            atoms = np.zeros((0, self.cost.dimension))
        weights = np.atleast_1d(np.asarray(self.weights, dtype=float)).ravel()
        if weights.shape[0] != atoms.shape[0]:
            raise AlignmentError(f"{weights.shape[0]} weights for {atoms.shape[0]} atoms")
        object.__setattr__(self, "epsilon", float(self.epsilon))
        object.__setattr__(self, "atoms", _frozen(atoms))
        object.__setattr__(self, "weights", _frozen(weights))

    @property
    def size(self) -> int:
        return self.atoms.shape[0]

    def __call__(self, xs) -> np.ndarray:
        return eval_potential(self, xs)

    def append(self, atoms, weights) -> "Potential":
        """New potential with extra atoms concatenated after the current ones."""
        atoms = as_points(atoms, self.cost.dimension)
        return Potential(
            self.epsilon,
            np.concatenate([self.weights, np.asarray(weights, dtype=float)]),
            np.concatenate([self.atoms, atoms]),
            self.cost,
        )

    def shift(self, c: float) -> "Potential":
        """Add c to every log-weight; evaluations move by -c."""
        return Potential(self.epsilon, self.weights + c, self.atoms, self.cost)


@dataclass(frozen=True, eq=False)
class DualPair:
    """The pair of dual potentials (f on the source side, g on the target side)."""

    f: Potential
    g: Potential

    def __post_init__(self):
        if self.f.epsilon != self.g.epsilon:
            raise ConfigurationError(
                f"dual pair epsilons differ: {self.f.epsilon} vs {self.g.epsilon}"
            )
        if self.f.cost != self.g.cost:
            raise ConfigurationError("dual pair potentials use different costs")

    @property
    def epsilon(self) -> float:
        return self.f.epsilon

    @property
    def cost(self) -> CostSpec:
        return self.f.cost


def eval_potential(p: Potential, xs) -> np.ndarray:
    """
    Evaluate f(x) = -eps * log sum_i exp((q_i - C(x, atom_i)) / eps).

    Args:
        p: Potential to evaluate
        xs: Points, shape (m, d) or a flat vector in 1D

    Returns:
        Vector of m values
    """
    xs = as_points(xs, p.cost.dimension)
    if xs.shape[0] == 0:
        raise RepresentationEmptyError("no evaluation points given")
    if p.size == 0:
        raise RepresentationEmptyError("potential has no atoms")
    return -p.epsilon * log_kernel_sums(xs, p.atoms, p.weights / p.epsilon, p.epsilon, p.cost)


def soft_c_transform(h_values, measure: "WeightedMeasure", cost: CostSpec,
                     epsilon: float, xs) -> np.ndarray:
    """
    T_mu(h)(x) = -eps * log sum_j w_j exp((h(y_j) - C(x, y_j)) / eps).

    Args:
        h_values: h evaluated on the measure atoms
        measure: Weighted measure mu
        cost: Ground cost
        epsilon: Regularisation
        xs: Evaluation points

    Returns:
        Vector of values at xs
    """
    h_values = np.asarray(h_values, dtype=float).ravel()
    weights = np.asarray(measure.weights, dtype=float)
    if h_values.shape[0] != weights.shape[0]:
        raise AlignmentError(
            f"h has {h_values.shape[0]} values but the measure has {weights.shape[0]} atoms"
        )
    if not weights.sum() > 0:
        raise ConfigurationError("measure must carry positive total mass")
    with np.errstate(divide="ignore"):
        log_w = np.log(weights)
    return -epsilon * log_kernel_sums(xs, measure.atoms, h_values / epsilon + log_w, epsilon, cost)


def variational_norm(values) -> float:
    """max(values) - min(values); the seminorm of potentials modulo constants."""
    values = np.asarray(values, dtype=float)
    if values.size == 0:
        raise RepresentationEmptyError("variational norm of an empty vector")
    return float(values.max() - values.min())


def dual_objective(pair: DualPair, xs_alpha, ys_beta) -> float:
    """
    Monte Carlo estimate of the entropic dual objective.

    F(f, g) = mean f(x_i) + mean g(y_j) - eps * mean_ij exp((f(x_i) + g(y_j) - C(x_i, y_j)) / eps)

    Args:
        pair: Dual potentials
        xs_alpha: Samples of the source measure
        ys_beta: Samples of the target measure

    Returns:
        Objective value
    """
    eps = pair.epsilon
    xs = as_points(xs_alpha, pair.cost.dimension)
    ys = as_points(ys_beta, pair.cost.dimension)
    if xs.shape[0] == 0 or ys.shape[0] == 0:
        raise RepresentationEmptyError("dual objective needs samples on both sides")
    fx = pair.f(xs)
    gy = pair.g(ys)
    rows = log_kernel_sums(xs, ys, gy / eps, eps, pair.cost)
    log_mass = logsumexp(fx / eps + rows) - np.log(xs.shape[0] * ys.shape[0])
    return float(fx.mean() + gy.mean() - eps * np.exp(log_mass))

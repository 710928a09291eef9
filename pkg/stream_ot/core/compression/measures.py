"""
Weighted Measures
=================

The measures that compression acts on, and the maps between a potential's
atom representation and such a measure.

For u = exp(-f/eps) with atoms (q_i, y_i) and a weighting phi = exp(-g/eps),
the measure is mu = sum_i exp((q_i - g(y_i))/eps) delta_{y_i}. Compressing mu
and mapping back gives a potential with fewer atoms.
"""

import logging
from dataclasses import dataclass
from typing import Optional

import numpy as np

from stream_ot.config import settings
from stream_ot.core.potentials import CostSpec, Potential, _frozen, as_points
from stream_ot.errors import (
    AlignmentError,
    ConfigurationError,
    RepresentationCorruptionError,
    RepresentationEmptyError,
)


@dataclass(frozen=True, eq=False)
class WeightedMeasure:
    """
    Atoms with nonnegative weights.

    Attributes:
        atoms: Atom positions, shape (n, d)
        weights: Nonnegative weights, at least one strictly positive
    """

    atoms: np.ndarray
    weights: np.ndarray

    def __post_init__(self):
        atoms = as_points(self.atoms)
        weights = np.atleast_1d(np.asarray(self.weights, dtype=float)).ravel()
        if weights.shape[0] != atoms.shape[0]:
            raise AlignmentError(f"{weights.shape[0]} weights for {atoms.shape[0]} atoms")
        if not np.all(np.isfinite(weights)) or not np.all(np.isfinite(atoms)):
            raise ConfigurationError("measure atoms and weights must be finite")
        if np.any(weights < 0):
            raise ConfigurationError(f"measure weights must be nonnegative, min is {weights.min()}")
        if not np.any(weights > 0):
            raise RepresentationEmptyError("measure carries no mass")
        object.__setattr__(self, "atoms", _frozen(atoms))
        object.__setattr__(self, "weights", _frozen(weights))

    @property
    def size(self) -> int:
        return self.atoms.shape[0]

    @property
    def dimension(self) -> int:
        return self.atoms.shape[1]

    @property
    def total_mass(self) -> float:
        return float(self.weights.sum())

    def moments(self, degree: int) -> np.ndarray:
        """Polynomial moments sum_i w_i y_i^k for k = 0..degree (1D only)."""
        if self.dimension != 1:
            raise ConfigurationError("polynomial moments are only defined here for 1D measures")
        powers = np.vander(self.atoms[:, 0], degree + 1, increasing=True)
        return powers.T @ self.weights

    def merged(self) -> "WeightedMeasure":
        """Sorted copy with coincident atoms merged (weights summed) and zero weights dropped."""
        unique, inverse = np.unique(self.atoms, axis=0, return_inverse=True)
        weights = np.bincount(inverse.ravel(), weights=self.weights, minlength=unique.shape[0])
        keep = weights > 0
        return WeightedMeasure(unique[keep], weights[keep])

    def pruned(self, ratio: float = settings.PRUNE_RATIO) -> "WeightedMeasure":
        """Drop atoms whose weight is below ratio * max weight."""
        keep = self.weights >= ratio * self.weights.max()
        if np.all(keep):
            return self
        return WeightedMeasure(self.atoms[keep], self.weights[keep])


@dataclass(frozen=True, eq=False)
class CompressionResult:
    """
    Outcome of one compression.

    Attributes:
        measure: The compressed measure (the input itself for a no-op)
        residual: Moment residual of the solve (0 for exact quadrature)
        converged: False when the solver hit its iteration cap
        no_op: True when the requested size left nothing to compress
        iterations: Solver iterations
    """

    measure: WeightedMeasure
    residual: float = 0.0
    converged: bool = True
    no_op: bool = False
    iterations: int = 0


def _check_compatible(u: Potential, v: Optional[Potential]):
    if v is None:
        return
    if u.epsilon != v.epsilon:
        raise ConfigurationError(f"potentials use different epsilons: {u.epsilon} vs {v.epsilon}")
    if u.cost != v.cost:
        raise ConfigurationError("potentials use different costs")


def potential_to_measure(u_rep: Potential, v: Optional[Potential] = None,
                         v_values: Optional[np.ndarray] = None) -> WeightedMeasure:
    """
    mu = sum_i exp(q_i/eps) phi(y_i) delta_{y_i} with phi = exp(-v/eps).

    Args:
        u_rep: Potential whose atoms and log-weights define u
        v: Potential defining the weighting phi; phi = 1 when omitted
        v_values: v already evaluated on the atoms of u_rep

    Returns:
        WeightedMeasure on the atoms of u_rep

    Raises:
        RepresentationCorruptionError: If a weight exceeds 1 under a potential weighting
    """
    _check_compatible(u_rep, v)
    if u_rep.size == 0:
        raise RepresentationEmptyError("potential has no atoms")
    eps = u_rep.epsilon
    log_w = u_rep.weights / eps
    if v is not None:
        if v_values is None:
            v_values = v(u_rep.atoms)
        log_w = log_w - np.asarray(v_values, dtype=float) / eps
    weights = np.exp(log_w)
    if v is not None and weights.max() > 1.0 + settings.WEIGHT_SLACK:
        raise RepresentationCorruptionError(
            f"measure weight {weights.max():.6g} exceeds 1 at atom {int(np.argmax(weights))}"
        )
    return WeightedMeasure(u_rep.atoms, weights)


def measure_to_potential(mu_hat: WeightedMeasure, v: Optional[Potential],
                         epsilon: float) -> Potential:
    """
    Inverse of potential_to_measure: q_i = eps * log w_i + v(y_i).

    Args:
        mu_hat: Measure with strictly positive weights
        v: Weighting potential used to build the measure (None for phi = 1)
        epsilon: Regularisation

    Returns:
        Potential on the atoms of mu_hat
    """
    if np.any(mu_hat.weights <= 0):
        raise ConfigurationError("zero-weight atoms must be pruned before reconstruction")
    q = epsilon * np.log(mu_hat.weights)
    if v is not None:
        if v.epsilon != epsilon:
            raise ConfigurationError(f"weighting uses epsilon {v.epsilon}, reconstruction {epsilon}")
        q = q + v(mu_hat.atoms)
        cost = v.cost
    else:
        cost = CostSpec(mu_hat.dimension)
    return Potential(epsilon, q, mu_hat.atoms, cost)


def compression_error_probe(f: Potential, f_hat: Potential, grid) -> float:
    """sup |f - f_hat| over the probe points."""
    _check_compatible(f, f_hat)
    grid = as_points(grid, f.cost.dimension)
    err = float(np.max(np.abs(f(grid) - f_hat(grid))))
    logging.debug(f"Compression sup error {err:.3e} on {grid.shape[0]} probe points")
    return err

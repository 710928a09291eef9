"""
Fourier Moment Compression
==========================

Keeps the atoms of a measure and looks for new nonnegative weights that
match the moments

    P_k(y) = (eps*pi)^(d/2) exp(-eps |k|^2 / 4) exp(-i k.y) / phi(y)

for a set of frequencies k (the zero frequency plus QMC Gaussian draws).
The complex system is stacked into real and imaginary rows and solved by
nonnegative least squares.
"""

import logging
from dataclasses import dataclass
from typing import Optional, Tuple

import numpy as np

from stream_ot.config import settings
from stream_ot.core.compression.measures import CompressionResult, WeightedMeasure
from stream_ot.core.compression.nnls import NNLSResult, nnls
from stream_ot.core.potentials import KERNEL_COUNTER, Potential
from stream_ot.core.sampling import qmc_gaussian_frequencies
from stream_ot.errors import ConfigurationError, ScalingError


@dataclass(frozen=True, eq=False)
class FrequencySet:
    """
    Test frequencies for the moment system.

    Attributes:
        frequencies: Array (m, d); row 0 is the zero frequency
        epsilon: Regularisation setting the Gaussian kernel scale
    """

    frequencies: np.ndarray
    epsilon: float

    def __post_init__(self):
        freqs = np.atleast_2d(np.asarray(self.frequencies, dtype=float))
        if freqs.shape[0] < 1:
            raise ConfigurationError("frequency set is empty")
        if not self.epsilon > 0:
            raise ConfigurationError(f"epsilon must be positive, got {self.epsilon}")
        object.__setattr__(self, "frequencies", freqs)

    @classmethod
    def qmc(cls, m: int, d: int, epsilon: float) -> "FrequencySet":
        """The zero frequency followed by m - 1 QMC draws from N(0, (2/eps) I)."""
        if m < 1:
            raise ConfigurationError(f"need at least one frequency, got m={m}")
        zero = np.zeros((1, d))
        if m == 1:
            return cls(zero, epsilon)
        return cls(np.vstack([zero, qmc_gaussian_frequencies(m - 1, d, epsilon)]), epsilon)

    @property
    def size(self) -> int:
        return self.frequencies.shape[0]

    @property
    def dimension(self) -> int:
        return self.frequencies.shape[1]

    def kernel_scales(self) -> np.ndarray:
        """(eps*pi)^(d/2) exp(-eps |k|^2 / 4) for every frequency."""
        eps = self.epsilon
        sq = np.einsum("ij,ij->i", self.frequencies, self.frequencies)
        return (eps * np.pi) ** (self.dimension / 2.0) * np.exp(-eps * sq / 4.0)


@dataclass(frozen=True, eq=False)
class MomentSystem:
    """
    Moment matrix and right-hand side, up to a common factor.

    The true system is exp(log_scale) * (matrix, rhs); the factor is pulled
    out so that the largest column scale is 1.
    """

    matrix: np.ndarray
    rhs: np.ndarray
    log_scale: float

    def stacked(self) -> Tuple[np.ndarray, np.ndarray]:
        """Real system with the real parts on top of the imaginary parts."""
        return stack_real(self.matrix, self.rhs)


def stack_real(matrix: np.ndarray, rhs: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    return np.vstack([matrix.real, matrix.imag]), np.concatenate([rhs.real, rhs.imag])


def _fourier_features(atoms: np.ndarray, freqs: FrequencySet) -> np.ndarray:
    if atoms.shape[1] != freqs.dimension:
        raise ConfigurationError(
            f"atoms are {atoms.shape[1]}-dimensional, frequencies {freqs.dimension}-dimensional"
        )
    KERNEL_COUNTER.add(freqs.size * atoms.shape[0])
    phase = freqs.frequencies @ atoms.T
    return freqs.kernel_scales()[:, None] * np.exp(-1j * phase)


def _log_column_scales(mu: WeightedMeasure, v: Optional[Potential], epsilon: float,
                       v_values: Optional[np.ndarray] = None) -> Tuple[np.ndarray, float]:
    """
    log(1/phi(y_i)) minus its maximum, and that maximum.

    Raises:
        ScalingError: If some 1/phi(y_i) underflows relative to the largest one
    """
    if v is None:
        return np.zeros(mu.size), 0.0
    if v.epsilon != epsilon:
        raise ConfigurationError(f"weighting uses epsilon {v.epsilon}, frequencies {epsilon}")
    if v_values is None:
        v_values = v(mu.atoms)
    log_inv_phi = np.asarray(v_values, dtype=float) / epsilon
    top = float(log_inv_phi.max())
    rel = log_inv_phi - top
    lowest = float(rel.min())
    if lowest < settings.LOG_UNDERFLOW:
        i = int(np.argmin(rel))
        raise ScalingError(
            f"moment column {i} underflows: 1/phi(y_i) is exp({lowest:.1f}) times the largest one "
            f"(eps={epsilon}); increase eps or compress a narrower measure"
        )
    return rel, top


def fourier_moment_system(mu: WeightedMeasure, v: Optional[Potential],
                          freqs: FrequencySet) -> MomentSystem:
    """
    M[k, i] = P_k(y_i) and b[k] = sum_i w_i P_k(y_i), so that M w = b.

    Args:
        mu: Measure to compress
        v: Weighting potential (phi = exp(-v/eps)); phi = 1 when omitted
        freqs: Frequency set

    Returns:
        MomentSystem with the largest column scale factored out

    Raises:
        ScalingError: If some 1/phi(y_i) underflows relative to the largest one
    """
    rel, top = _log_column_scales(mu, v, freqs.epsilon)
    matrix = _fourier_features(mu.atoms, freqs) * np.exp(rel)[None, :]
    return MomentSystem(matrix=matrix, rhs=matrix @ mu.weights, log_scale=top)


def fourier_reweight(atoms: np.ndarray, z: np.ndarray, freqs: FrequencySet) -> NNLSResult:
    """
    Nonnegative z_hat on the same atoms with the Fourier moments of z.

    z should be scaled to a maximum of 1; the NNLS tolerance is relative to
    the size of the system, so only the conditioning depends on it.
    """
    features = _fourier_features(atoms, freqs)
    A, b = stack_real(features, features @ z)
    return nnls(A, b)


def fourier_compress(mu: WeightedMeasure, v: Optional[Potential], m: int, epsilon: float,
                     freqs: Optional[FrequencySet] = None,
                     v_values: Optional[np.ndarray] = None) -> CompressionResult:
    """
    Reweight the atoms of mu so that m Fourier moments are preserved.

    The solve runs in the column-scaled unknowns z_i = w_i / phi(y_i),
    normalised to a largest value of 1. That is the same least-squares
    problem with well-scaled columns. Atoms with weight below PRUNE_RATIO
    times the largest are dropped.

    Args:
        mu: Measure to compress
        v: Weighting potential; phi = 1 when omitted
        m: Number of frequencies (the zero frequency included)
        epsilon: Regularisation
        freqs: Explicit frequencies, overriding the QMC set
        v_values: v already evaluated on the atoms of mu

    Returns:
        CompressionResult; residual is ||M w_hat - b|| in the column-scaled system
        of fourier_moment_system

    Raises:
        ScalingError: If a column scale underflows or a weight overflows
    """
    if m < 1:
        raise ConfigurationError(f"compression size must be at least 1, got {m}")
    if freqs is None:
        freqs = FrequencySet.qmc(m, mu.dimension, epsilon)
    rel, _ = _log_column_scales(mu, v, epsilon, v_values)

    # 1. Normalised unknowns
    with np.errstate(divide="ignore"):
        log_z = np.log(mu.weights) + rel
    top = float(log_z.max())
    z = np.exp(log_z - top)

    # 2. Nonnegative least squares
    result = fourier_reweight(mu.atoms, z, freqs)
    if not result.converged:
        logging.warning(
            f"Fourier compression: NNLS did not converge (residual {result.residual:.3e}, "
            f"max dual {result.max_dual:.3e}, {result.rejected} rejected columns)"
        )
    z_hat = result.x
    residual = result.residual * float(np.exp(top))
    if not np.any(z_hat > 0):
        return CompressionResult(mu, residual=residual, converged=False, iterations=result.iterations)

    # 3. Prune and map back to measure weights
    keep = z_hat >= settings.PRUNE_RATIO * z_hat.max()
    log_w = np.log(z_hat[keep]) + top - rel[keep]
    if log_w.max() > -settings.LOG_UNDERFLOW:
        raise ScalingError(f"compressed weight exp({log_w.max():.1f}) overflows")
    compressed = WeightedMeasure(mu.atoms[keep], np.exp(log_w))
    logging.debug(f"Fourier compression: {mu.size} -> {compressed.size} atoms with {freqs.size} frequencies")
    return CompressionResult(compressed, residual=residual, converged=result.converged,
                             iterations=result.iterations)

"""
Sampling
========

Test distributions (Gaussian and two-component Gaussian mixture), i.i.d.
sampling, random covariance generation and quasi-Monte Carlo Gaussian
frequencies for Fourier compression.
"""

import logging
import warnings
from dataclasses import dataclass
from typing import List, Optional, Sequence

import numpy as np
from scipy.special import ndtri
from scipy.stats import qmc

from stream_ot.errors import ConfigurationError

DISTRIBUTION_KINDS = ("gaussian", "gmm2")


class RngState:
    """
    Seeded random stream. Single-owner: sampling advances its state.

    Attributes:
        seed: The 64-bit seed the stream was derived from
        generator: The underlying numpy Generator (PCG64)
    """

    def __init__(self, seed: int, sequence: Optional[np.random.SeedSequence] = None):
        self.seed = int(seed) % (2 ** 64)
        self.sequence = sequence if sequence is not None else np.random.SeedSequence(self.seed)
        self.generator = np.random.Generator(np.random.PCG64(self.sequence))

    def spawn(self, k: int) -> List["RngState"]:
        """Independent child streams; spawn once per run for reproducibility."""
        return [RngState(self.seed, child) for child in self.sequence.spawn(k)]

    def __repr__(self):
        return f"RngState(seed={self.seed})"


@dataclass(frozen=True, eq=False)
class DistributionSpec:
    """
    Gaussian or equal-probability style Gaussian mixture in R^d.

    Attributes:
        kind: "gaussian" or "gmm2"
        means: Component means, shape (k, d)
        covariances: Component covariances, shape (k, d, d)
        mixture_weights: Component probabilities, shape (k,)
        name: Optional preset name, used in logs and summaries
    """

    kind: str
    means: np.ndarray
    covariances: np.ndarray
    mixture_weights: np.ndarray
    name: str = ""

    def __post_init__(self):
        if self.kind not in DISTRIBUTION_KINDS:
            raise ConfigurationError(f"unknown distribution kind '{self.kind}'")
        means = np.atleast_2d(np.asarray(self.means, dtype=float))
        covs = np.asarray(self.covariances, dtype=float)
        if covs.ndim == 0:
            covs = covs.reshape(1, 1, 1)
        elif covs.ndim == 2:
            covs = covs[None, :, :]
        weights = np.atleast_1d(np.asarray(self.mixture_weights, dtype=float))

        expected = 1 if self.kind == "gaussian" else 2
        if means.shape[0] != expected or covs.shape[0] != expected or weights.shape[0] != expected:
            raise ConfigurationError(f"'{self.kind}' needs exactly {expected} component(s)")
        d = means.shape[1]
        if covs.shape[1:] != (d, d):
            raise ConfigurationError(f"covariances must be {d}x{d}, got {covs.shape[1:]}")
        if np.any(weights < 0) or abs(weights.sum() - 1.0) > 1e-12:
            raise ConfigurationError(f"mixture weights must be nonnegative and sum to 1, got {weights}")

        factors = []
        for cov in covs:
            if not np.allclose(cov, cov.T, rtol=0, atol=1e-12 * max(1.0, np.abs(cov).max())):
                raise ConfigurationError("covariance matrix is not symmetric")
            try:
                factors.append(np.linalg.cholesky(cov))
            except np.linalg.LinAlgError:
                raise ConfigurationError("covariance matrix is not positive definite")

        object.__setattr__(self, "means", means)
        object.__setattr__(self, "covariances", covs)
        object.__setattr__(self, "mixture_weights", weights)
        object.__setattr__(self, "_factors", np.stack(factors))

    @property
    def dimension(self) -> int:
        return self.means.shape[1]

    @classmethod
    def gaussian(cls, mean, covariance, name: str = "") -> "DistributionSpec":
        mean = np.atleast_1d(np.asarray(mean, dtype=float))
        cov = np.asarray(covariance, dtype=float).reshape(mean.shape[0], mean.shape[0])
        return cls("gaussian", mean[None, :], cov[None, :, :], np.ones(1), name)

    @classmethod
    def mixture(cls, means: Sequence, covariances: Sequence,
                weights: Optional[Sequence[float]] = None, name: str = "") -> "DistributionSpec":
        weights = np.full(2, 0.5) if weights is None else weights
        return cls("gmm2", np.asarray(means, dtype=float), np.asarray(covariances, dtype=float),
                   np.asarray(weights, dtype=float), name)


def sample(spec: DistributionSpec, n: int, rng: RngState) -> np.ndarray:
    """
    Draw n i.i.d. samples.

    For mixtures, the component is drawn first, then the Gaussian.

    Args:
        spec: Distribution to sample
        n: Number of samples
        rng: Stream to draw from (advanced in place)

    Returns:
        Array of shape (n, d)
    """
    if n < 1:
        raise ConfigurationError(f"sample size must be at least 1, got {n}")
    gen = rng.generator
    if spec.kind == "gaussian":
        z = gen.standard_normal((n, spec.dimension))
        return spec.means[0][None, :] + z @ spec._factors[0].T

    components = gen.choice(spec.mixture_weights.shape[0], size=n, p=spec.mixture_weights)
    z = gen.standard_normal((n, spec.dimension))
    return spec.means[components] + np.einsum("nij,nj->ni", spec._factors[components], z)


def random_covariance(d: int, c: float, rng: RngState) -> np.ndarray:
    """
    Random SPD matrix c * Q Q^T with Q i.i.d. standard normal.

    A ridge of 1e-8 * c keeps the result strictly positive definite.

    Args:
        d: Dimension
        c: Positive scale
        rng: Stream to draw from

    Returns:
        (d, d) symmetric positive-definite matrix
    """
    if d < 1 or not c > 0:
        raise ConfigurationError(f"random covariance needs d >= 1 and c > 0, got d={d}, c={c}")
    q = rng.generator.standard_normal((d, d))
    cov = c * (q @ q.T)
    cov = 0.5 * (cov + cov.T)
    return cov + 1e-8 * c * np.eye(d)


def low_discrepancy_points(m: int, d: int) -> np.ndarray:
    """
    First m points of the unscrambled Sobol' sequence in [0, 1)^d, skipping the origin.

    Args:
        m: Number of points
        d: Dimension

    Returns:
        Array of shape (m, d), strictly inside (0, 1)
    """
    engine = qmc.Sobol(d, scramble=False)
    engine.fast_forward(1)
    with warnings.catch_warnings():
        # balance warnings for non powers of two do not apply once the origin is skipped
        warnings.simplefilter("ignore", UserWarning)
        return engine.random(m)


def qmc_gaussian_frequencies(m: int, d: int, epsilon: float) -> np.ndarray:
    """
    QMC frequencies distributed as N(0, (2 / eps) I).

    Args:
        m: Number of frequencies
        d: Dimension
        epsilon: Regularisation setting the frequency scale

    Returns:
        Array of shape (m, d)
    """
    if m < 1:
        raise ConfigurationError(f"need at least one frequency, got m={m}")
    points = low_discrepancy_points(m, d)
    scale = np.sqrt(2.0 / epsilon)
    logging.debug(f"Generated {m} QMC frequencies in dimension {d} (scale {scale:.4f})")
    return ndtri(points) * scale

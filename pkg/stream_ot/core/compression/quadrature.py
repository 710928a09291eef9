"""
Gaussian Quadrature Compression
===============================

m-point Gaussian quadrature of a discrete 1D measure. The recurrence
coefficients of the measure's orthogonal polynomials come from Lanczos on
diag(atoms) started at sqrt(w / sum w); the nodes are the eigenvalues of the
resulting Jacobi matrix and the weights are the total mass times the squared
first eigenvector components.

Lanczos keeps its basis semi-orthogonal (overlaps below sqrt(machine eps)),
which is enough for recurrence coefficients accurate to working precision.
Each step measures the overlaps of the new vector with one projection and
reorthogonalises fully only when they exceed that level.
"""

import logging
from typing import Tuple

import numpy as np
from scipy.linalg import eigh_tridiagonal

from stream_ot.config import settings
from stream_ot.core.compression.measures import CompressionResult, WeightedMeasure
from stream_ot.core.potentials import KERNEL_COUNTER
from stream_ot.errors import ConfigurationError

_BREAKDOWN = 1e-13
_SEMI_ORTHOGONAL = float(np.sqrt(np.finfo(float).eps))


def jacobi_matrix(atoms: np.ndarray, weights: np.ndarray, m: int) -> Tuple[np.ndarray, np.ndarray]:
    """
    Diagonal and off-diagonal of the m x m Jacobi matrix of a discrete measure.

    Uses Lanczos with partial reorthogonalisation; stops early if the
    Krylov space is exhausted.

    Args:
        atoms: Distinct 1D atoms (n,)
        weights: Positive weights (n,)
        m: Requested size

    Returns:
        Tuple (alpha, beta) with len(beta) == len(alpha) - 1
    """
    n = atoms.shape[0]
    Q = np.zeros((m, n))
    alpha = np.zeros(m)
    beta = np.zeros(max(m - 1, 0))
    Q[0] = np.sqrt(weights / weights.sum())
    reorthogonalised = 0

    for j in range(m):
        z = atoms * Q[j]
        alpha[j] = Q[j] @ z
        z -= alpha[j] * Q[j]
        if j > 0:
            z -= beta[j - 1] * Q[j - 1]
        if j == m - 1:
            break
        basis = Q[: j + 1]
        overlaps = basis @ z
        if np.abs(overlaps).max() > _SEMI_ORTHOGONAL * np.linalg.norm(z):
            # twice is enough
            z -= basis.T @ overlaps
            z -= basis.T @ (basis @ z)
            reorthogonalised += 1
        beta[j] = np.linalg.norm(z)
        if beta[j] <= _BREAKDOWN * max(1.0, np.abs(atoms).max()):
            logging.warning(f"Lanczos breakdown at step {j + 1} of {m}; returning {j + 1} nodes")
            return alpha[: j + 1], beta[:j]
        Q[j + 1] = z / beta[j]
    logging.debug(f"Lanczos: {m} steps on {n} atoms, {reorthogonalised} full reorthogonalisations")
    return alpha, beta


def gauss_nodes_weights(atoms: np.ndarray, weights: np.ndarray, m: int) -> Tuple[np.ndarray, np.ndarray]:
    """
    Nodes and weights of the m-point Gaussian rule of sum_i w_i delta_{x_i}.

    Atoms are centred and scaled before the recurrence and mapped back after.
    """
    center = float(np.average(atoms, weights=weights))
    scale = float(np.abs(atoms - center).max()) or 1.0
    alpha, beta = jacobi_matrix((atoms - center) / scale, weights, m)
    eigenvalues, vectors = eigh_tridiagonal(alpha, beta)
    nodes = center + scale * eigenvalues
    return nodes, weights.sum() * vectors[0] ** 2


def gq_compress(mu: WeightedMeasure, m: int) -> CompressionResult:
    """
    Compress a 1D measure to its m-point Gaussian quadrature.

    Polynomial moments up to degree 2m - 1 are preserved. Coincident atoms
    are merged first; when m exceeds the number of distinct atoms the input
    is returned unchanged with no_op=True.

    Args:
        mu: Measure in dimension 1
        m: Number of nodes

    Returns:
        CompressionResult
    """
    if mu.dimension != 1:
        raise ConfigurationError(f"Gaussian quadrature compression needs d = 1, got d = {mu.dimension}")
    if m < 1:
        raise ConfigurationError(f"compression size must be at least 1, got {m}")

    merged = mu.merged()
    if m > merged.size:
        logging.debug(f"GQ: {m} nodes requested for {merged.size} distinct atoms, nothing to do")
        return CompressionResult(mu, no_op=True)

    atoms = merged.atoms[:, 0]
    KERNEL_COUNTER.add(m * atoms.shape[0])
    nodes, weights = gauss_nodes_weights(atoms, merged.weights, m)
    compressed = WeightedMeasure(nodes[:, None], np.maximum(weights, 0.0)).pruned(settings.PRUNE_RATIO)
    return CompressionResult(compressed, iterations=m)

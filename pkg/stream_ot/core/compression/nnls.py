"""
Nonnegative Least Squares
=========================

Active-set (Lawson-Hanson) solver for min ||A x - b|| subject to x >= 0.

The least-squares subproblems on the passive set are solved through a
Cholesky factor of A_P^T A_P that grows by one row per added column.
Columns that are numerically dependent on the passive set are rejected
instead of being added. A rejection is lifted whenever a column leaves the
passive set, and rejected columns still count in the final KKT check.
"""

import logging
from dataclasses import dataclass
from typing import List, Optional

import numpy as np
from scipy.linalg import cho_solve, solve_triangular

from stream_ot.config import settings
from stream_ot.errors import AlignmentError

# squared residual norm of a new column against the passive span, relative to its own
_DEPENDENCE_RATIO = 1e-10


@dataclass(frozen=True, eq=False)
class NNLSResult:
    """
    Attributes:
        x: Nonnegative solution
        residual: ||A x - b||
        converged: Whether the KKT conditions hold within tol
        iterations: Number of columns moved into the passive set
        tol: Tolerance used for the KKT conditions
        rejected: Columns still marked dependent or cycling at exit
        max_dual: Largest dual variable over the columns outside the passive set
    """

    x: np.ndarray
    residual: float
    converged: bool
    iterations: int
    tol: float
    rejected: int = 0
    max_dual: float = 0.0


def default_tolerance(A: np.ndarray, b: np.ndarray) -> float:
    """10 * machine eps * max(m, n) * ||A||_F * ||b||; scales with the system, no absolute floor."""
    eps = np.finfo(float).eps
    scale = float(np.linalg.norm(A) * np.linalg.norm(b))
    return 10.0 * eps * max(A.shape) * scale


def _append_column(L: np.ndarray, A_passive: np.ndarray, column: np.ndarray,
                   norm2: float) -> Optional[np.ndarray]:
    if norm2 <= 0.0:
        return None
    k = L.shape[0]
    if k == 0:
        return np.array([[np.sqrt(norm2)]])
    r = solve_triangular(L, A_passive.T @ column, lower=True)
    d2 = norm2 - r @ r
    if d2 <= _DEPENDENCE_RATIO * norm2:
        return None
    grown = np.zeros((k + 1, k + 1))
    grown[:k, :k] = L
    grown[k, :k] = r
    grown[k, k] = np.sqrt(d2)
    return grown


def _refactor(A: np.ndarray, passive: List[int], norms2: np.ndarray):
    """Rebuild the factor after removals; returns (L, kept indices, dropped indices)."""
    L = np.zeros((0, 0))
    kept: List[int] = []
    dropped: List[int] = []
    for j in passive:
        grown = _append_column(L, A[:, kept], A[:, j], norms2[j])
        if grown is None:
            dropped.append(j)
        else:
            L = grown
            kept.append(j)
    return L, kept, dropped


def nnls(A, b, tol: Optional[float] = None, max_iter: Optional[int] = None) -> NNLSResult:
    """
    Lawson-Hanson nonnegative least squares.

    Args:
        A: Real matrix (m, n)
        b: Real vector (m,)
        tol: KKT tolerance; see default_tolerance
        max_iter: Cap on outer iterations, 3 * n by default

    Returns:
        NNLSResult; on hitting the cap the best iterate is returned with converged=False
    """
    A = np.asarray(A, dtype=float)
    b = np.asarray(b, dtype=float).ravel()
    if A.ndim != 2 or A.shape[0] != b.shape[0]:
        raise AlignmentError(f"matrix of shape {A.shape} does not match a right-hand side of length {b.shape[0]}")
    m, n = A.shape
    tol = default_tolerance(A, b) if tol is None else float(tol)
    max_iter = settings.NNLS_ITERATION_FACTOR * n if max_iter is None else int(max_iter)

    norms2 = np.einsum("ij,ij->j", A, A)
    Atb = A.T @ b
    x = np.zeros(n)
    in_passive = np.zeros(n, dtype=bool)
    rejected = np.zeros(n, dtype=bool)
    passive: List[int] = []
    L = np.zeros((0, 0))

    resid = b.copy()
    lsx = float(resid @ resid)
    w = A.T @ resid
    best_x, best_lsx = x.copy(), lsx
    iterations = 0

    while iterations < max_iter:
        # 1. most violated dual variable among the free columns
        candidates = np.where(in_passive | rejected, -np.inf, w)
        j = int(np.argmax(candidates))
        if not candidates[j] > tol:
            break
        iterations += 1

        grown = _append_column(L, A[:, passive], A[:, j], norms2[j])
        if grown is None:
            rejected[j] = True
            continue
        L = grown
        passive.append(j)
        in_passive[j] = True

        # 2. least squares on the passive set, stepping back to stay feasible
        while True:
            s = cho_solve((L, True), Atb[passive])
            if s.min() > 0:
                x[:] = 0.0
                x[passive] = s
                break
            xp = x[passive]
            blocking = s <= 0
            ratios = xp[blocking] / (xp[blocking] - s[blocking])
            step = ratios.min()
            xp = xp + step * (s - xp)
            xp[np.flatnonzero(blocking)[np.argmin(ratios)]] = 0.0
            leaving = [idx for idx, val in zip(passive, xp) if val <= 0]
            x[:] = 0.0
            x[passive] = np.maximum(xp, 0.0)
            for idx in leaving:
                in_passive[idx] = False
                x[idx] = 0.0
            # the passive span changed, so earlier dependence verdicts are stale
            rejected[:] = False
            remaining = [idx for idx in passive if in_passive[idx]]
            L, passive, dropped = _refactor(A, remaining, norms2)
            for idx in dropped:
                in_passive[idx] = False
                rejected[idx] = True
                x[idx] = 0.0
            if j in leaving and step == 0.0:
                # the new column cannot enter; keep it out to avoid cycling
                rejected[j] = True
            if not passive:
                break

        resid = b - A[:, passive] @ x[passive] if passive else b.copy()
        lsx_new = float(resid @ resid)
        if lsx_new < best_lsx:
            best_x, best_lsx = x.copy(), lsx_new
        stalled = in_passive[j] and lsx_new >= lsx > 0
        lsx = lsx_new
        w = A.T @ resid
        if stalled:
            # a column entered without lowering the objective: rounding makes the active set cycle
            logging.debug(f"NNLS stalled after {iterations} iterations at residual {np.sqrt(lsx):.3e}")
            break

    outside = ~in_passive
    max_dual = float(w[outside].max()) if np.any(outside) else 0.0
    converged = not max_dual > tol
    n_rejected = int(rejected.sum())
    if n_rejected and not converged and not np.any(w[outside & ~rejected] > tol):
        logging.debug(f"NNLS: {n_rejected} rejected column(s) still violate the KKT conditions (max dual {max_dual:.3e})")
    if iterations >= max_iter and not converged:
        logging.warning(f"NNLS stopped at the iteration cap ({max_iter}) with max dual {max_dual:.3e}")
        x, lsx = best_x, best_lsx
    return NNLSResult(x=x, residual=float(np.sqrt(max(lsx, 0.0))), converged=converged,
                      iterations=iterations, tol=tol, rejected=n_rejected, max_dual=max_dual)

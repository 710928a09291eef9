"""
Cell-wise Fourier Compression of Potentials
===========================================

For u = exp(-f/eps) = sum_i exp(q_i/eps) exp(-|x - y_i|^2 / eps) the
log-weights q_i of an online potential follow the potential itself, so they
span far more than double precision can resolve in a single moment system.

The atoms are split into spatial cells by median bisection. On each cell a
Gaussian tilt Q(y) = c + s.(y - y0) + k |y - y0|^2 is fitted to the q_i, and

    exp((Q(y) - |x - y|^2) / eps) = exp(R(x) / eps) exp(-|y - z(x)|^2 / (eps / (1 - k)))

turns the cell's share of u into a Gaussian mixture with kernel width
eps / (1 - k) and weights r_i = exp((q_i - Q(y_i)) / eps) of moderate range.
That mixture is compressed with Fourier moments and mapped back through Q.
Since the cells' shares are positive and add up to u, a relative error on
each cell bounds the relative error of u.

The extreme atoms of each cell along the coordinate axes (and diagonals)
are kept as they are, so the far field of each cell survives compression.
"""

import logging
from dataclasses import dataclass
from typing import List, Tuple

import numpy as np

from stream_ot.config import settings
from stream_ot.core.compression.fourier import FrequencySet, fourier_reweight
from stream_ot.core.compression.measures import CompressionResult, WeightedMeasure
from stream_ot.core.potentials import Potential
from stream_ot.errors import ConfigurationError, RepresentationEmptyError, ScalingError


@dataclass(frozen=True, eq=False)
class GaussianTilt:
    """
    Q(y) = const + slope.(y - center) + curvature |y - center|^2.

    Attributes:
        center: Expansion point, shape (d,)
        const: Constant term
        slope: Linear term, shape (d,)
        curvature: Coefficient of the squared distance, below 1
    """

    center: np.ndarray
    const: float
    slope: np.ndarray
    curvature: float

    def __call__(self, atoms: np.ndarray) -> np.ndarray:
        shifted = atoms - self.center
        return self.const + shifted @ self.slope + self.curvature * np.einsum("ij,ij->i", shifted, shifted)

    def kernel_epsilon(self, epsilon: float) -> float:
        """Width of the Gaussian kernel seen by the tilted weights."""
        return epsilon / (1.0 - self.curvature)


def fit_tilt(atoms: np.ndarray, q: np.ndarray) -> GaussianTilt:
    """
    Least-squares Gaussian tilt of the log-weights q over the atoms.

    1 - curvature is kept inside [TILT_CURVATURE_MIN, TILT_CURVATURE_MAX];
    when the fit leaves that range the curvature is clamped and the linear
    part refitted.
    """
    center = atoms.mean(axis=0)
    shifted = atoms - center
    sq = np.einsum("ij,ij->i", shifted, shifted)
    linear = np.hstack([np.ones((atoms.shape[0], 1)), shifted])
    coef, *_ = np.linalg.lstsq(np.hstack([linear, sq[:, None]]), q, rcond=None)
    curvature = float(coef[-1])

    bounded = float(np.clip(1.0 - curvature, settings.TILT_CURVATURE_MIN, settings.TILT_CURVATURE_MAX))
    if bounded != 1.0 - curvature:
        curvature = 1.0 - bounded
        coef, *_ = np.linalg.lstsq(linear, q - curvature * sq, rcond=None)
    return GaussianTilt(center=center, const=float(coef[0]), slope=np.asarray(coef[1:1 + atoms.shape[1]]),
                        curvature=curvature)


def partition_atoms(atoms: np.ndarray, max_size: int) -> List[np.ndarray]:
    """
    Index sets of a median bisection along the widest coordinate.

    Args:
        atoms: Points, shape (n, d)
        max_size: Largest allowed cell

    Returns:
        List of index arrays covering range(n) exactly once
    """
    if max_size < 1:
        raise ConfigurationError(f"cell size must be at least 1, got {max_size}")
    cells: List[np.ndarray] = []
    stack = [np.arange(atoms.shape[0])]
    while stack:
        idx = stack.pop()
        if idx.size <= max_size:
            cells.append(idx)
            continue
        pts = atoms[idx]
        axis = int(np.argmax(pts.max(axis=0) - pts.min(axis=0)))
        order = np.argsort(pts[:, axis], kind="stable")
        half = idx.size // 2
        stack.append(idx[order[half:]])
        stack.append(idx[order[:half]])
    return cells


def cell_size_limit(n: int, m: int) -> int:
    """Largest cell for n atoms and m frequencies: CELL_ATOMS, or more when m is small."""
    return max(settings.CELL_ATOMS, int(np.ceil(n * settings.MIN_CELL_FREQUENCIES / max(m, 1))))


def cell_count(n: int, max_size: int) -> int:
    """Number of cells partition_atoms produces for n atoms."""
    if n <= max_size:
        return 1
    half = n // 2
    return cell_count(half, max_size) + cell_count(n - half, max_size)


def extreme_directions(d: int) -> np.ndarray:
    """Unit directions whose extreme atoms are kept: +-axes, plus +-diagonals when d >= 2."""
    directions = [np.eye(d), -np.eye(d)]
    if d >= 2:
        ones = np.ones(d) / np.sqrt(d)
        alternating = np.where(np.arange(d) % 2 == 0, 1.0, -1.0) / np.sqrt(d)
        directions.append(np.vstack([ones, -ones, alternating, -alternating]))
    return np.vstack(directions)


def extreme_atoms(atoms: np.ndarray, directions: np.ndarray) -> np.ndarray:
    """Sorted indices of the atoms furthest out along each direction."""
    return np.unique(np.argmax(atoms @ directions.T, axis=0))


def _cell_budgets(extents: np.ndarray, kernel_widths: np.ndarray, m: int, d: int) -> np.ndarray:
    # frequencies follow the cell's size in kernel widths
    need = (1.0 + extents / kernel_widths) ** d
    share = m * need / need.sum()
    return np.maximum(min(settings.MIN_CELL_FREQUENCIES, m), np.round(share)).astype(int)


def fourier_compress_potential(u: Potential, m: int) -> Tuple[Potential, CompressionResult]:
    """
    Compress a potential cell by cell with tilted Fourier moments.

    About m frequencies are shared between the cells. Each cell keeps its
    extreme atoms and at most twice its frequency count of reweighted
    atoms. A cell whose solve does not converge, or that is already small,
    keeps its atoms unchanged.

    Args:
        u: Potential to compress
        m: Total frequency budget

    Returns:
        Tuple (compressed potential, CompressionResult). The result's measure
        carries the tilted weights r_i, each cell scaled to a largest value of 1;
        no_op is set when no cell was compressed.

    Raises:
        ScalingError: If tilted weights within a cell span more than exp(700)
    """
    if m < 1:
        raise ConfigurationError(f"compression size must be at least 1, got {m}")
    if u.size == 0:
        raise RepresentationEmptyError("potential has no atoms")
    eps = u.epsilon
    n, d = u.atoms.shape
    cells = partition_atoms(u.atoms, cell_size_limit(n, m))

    # 1. Tilts and frequency budgets
    tilts = [fit_tilt(u.atoms[idx], u.weights[idx]) for idx in cells]
    extents = np.array([np.ptp(u.atoms[idx], axis=0).max() for idx in cells])
    widths = np.array([np.sqrt(tilt.kernel_epsilon(eps)) for tilt in tilts])
    budgets = _cell_budgets(extents, widths, m, d)
    directions = extreme_directions(d)

    atoms_out, q_out, r_out = [], [], []
    residual2, iterations, compressed_cells, kept_cells = 0.0, 0, 0, 0
    for idx, tilt, m_c in zip(cells, tilts, budgets):
        atoms = u.atoms[idx]
        q = u.weights[idx]
        rho = (q - tilt(atoms)) / eps
        top = float(rho.max())
        rho = rho - top
        lowest = float(rho.min())
        if lowest < settings.LOG_UNDERFLOW:
            raise ScalingError(
                f"tilted weights of a {idx.size}-atom cell span exp({-lowest:.1f}); "
                f"the cell is too wide for eps={eps}"
            )
        r = np.exp(rho)

        # 2. Extreme atoms stay, the rest is reweighted
        anchors = np.zeros(idx.size, dtype=bool)
        anchors[extreme_atoms(atoms, directions)] = True
        rest = ~anchors
        if rest.sum() <= 2 * m_c:
            atoms_out.append(atoms)
            q_out.append(q)
            r_out.append(r)
            continue

        freqs = FrequencySet.qmc(int(m_c), d, tilt.kernel_epsilon(eps))
        result = fourier_reweight(atoms[rest] - tilt.center, r[rest], freqs)
        iterations += result.iterations
        z_hat = result.x
        if not result.converged or not np.any(z_hat > 0):
            logging.debug(
                f"Cell of {idx.size} atoms left uncompressed (max dual {result.max_dual:.3e}, tol {result.tol:.3e})"
            )
            kept_cells += 1
            atoms_out.append(atoms)
            q_out.append(q)
            r_out.append(r)
            continue

        keep = z_hat >= settings.PRUNE_RATIO * z_hat.max()
        kept_atoms = atoms[rest][keep]
        atoms_out.extend([atoms[anchors], kept_atoms])
        q_out.extend([q[anchors], tilt(kept_atoms) + eps * (np.log(z_hat[keep]) + top)])
        r_out.extend([r[anchors], z_hat[keep]])
        residual2 += result.residual ** 2
        compressed_cells += 1

    compressed = Potential(eps, np.concatenate(q_out), np.vstack(atoms_out), u.cost)
    logging.debug(
        f"Cell-wise Fourier compression: {u.size} -> {compressed.size} atoms over {len(cells)} cells "
        f"({compressed_cells} compressed, {kept_cells} kept after a failed solve), {int(budgets.sum())} frequencies"
    )
    measure = WeightedMeasure(compressed.atoms, np.concatenate(r_out))
    result = CompressionResult(measure, residual=float(np.sqrt(residual2)), converged=True,
                               no_op=compressed_cells == 0, iterations=iterations)
    return compressed, result

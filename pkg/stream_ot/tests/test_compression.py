"""
Compression Tests
=================

Weighted measures, the potential/measure maps, nonnegative least squares,
Gaussian quadrature, Fourier moment compression and its cell-wise
version for potentials.
"""

import logging
import sys
import unittest
from unittest.mock import patch

import numpy as np
from hypothesis import given, settings as hsettings, strategies as st
from scipy.optimize import nnls as scipy_nnls

from stream_ot.config import settings
from stream_ot.core.compression import (
    FrequencySet,
    WeightedMeasure,
    compression_error_probe,
    fourier_compress,
    fourier_moment_system,
    gq_compress,
    measure_to_potential,
    nnls,
    potential_to_measure,
)
from stream_ot.core.compression.cells import (
    GaussianTilt,
    cell_count,
    extreme_atoms,
    extreme_directions,
    fit_tilt,
    fourier_compress_potential,
    partition_atoms,
)
from stream_ot.core.compression.fourier import _fourier_features, stack_real
from stream_ot.core.compression.quadrature import jacobi_matrix
from stream_ot.core.constants.presets import get_distribution_pair
from stream_ot.core.online_sinkhorn import Schedule, run_online_sinkhorn
from stream_ot.core.potentials import CostSpec, Potential
from stream_ot.errors import (
    AlignmentError,
    ConfigurationError,
    RepresentationCorruptionError,
    RepresentationEmptyError,
    ScalingError,
)
from stream_ot.utils.helpers import colored, probe_grid

# Configure logging for tests
logging.basicConfig(level=logging.ERROR)

EPS = 0.5
COST_1D = CostSpec(1)
GRID = np.linspace(-3.0, 3.0, 31)[:, None]


def random_potential(n: int, seed: int, scale: float = 1.0) -> Potential:
    rng = np.random.default_rng(seed)
    return Potential(EPS, scale * rng.normal(size=n), rng.normal(size=(n, 1)), COST_1D)


class TestWeightedMeasure(unittest.TestCase):
    """Measure validation and helpers"""

    def test_validation(self):
        with self.assertRaises(ConfigurationError):
            WeightedMeasure([[0.0], [1.0]], [0.5, -0.1])
        with self.assertRaises(RepresentationEmptyError):
            WeightedMeasure([[0.0], [1.0]], [0.0, 0.0])
        with self.assertRaises(AlignmentError):
            WeightedMeasure([[0.0], [1.0]], [1.0])

    def test_merge_sums_duplicates(self):
        mu = WeightedMeasure([[1.0], [0.0], [1.0], [2.0]], [0.25, 0.5, 0.25, 0.0])
        merged = mu.merged()
        np.testing.assert_array_equal(merged.atoms[:, 0], [0.0, 1.0])
        np.testing.assert_array_equal(merged.weights, [0.5, 0.5])
        self.assertEqual(merged.total_mass, mu.total_mass)

    def test_moments(self):
        mu = WeightedMeasure([[1.0], [2.0]], [0.5, 0.5])
        np.testing.assert_allclose(mu.moments(3), [1.0, 1.5, 2.5, 4.5])


class TestPotentialMeasureMaps(unittest.TestCase):
    """potential_to_measure and measure_to_potential"""

    def test_round_trip_without_weighting(self):
        """Mapping to a measure and back gives the same potential"""
        u = random_potential(20, seed=0)
        back = measure_to_potential(potential_to_measure(u), None, EPS)
        np.testing.assert_allclose(back(GRID), u(GRID), rtol=0, atol=1e-10)

    def test_round_trip_with_weighting(self):
        print(f"\n{colored('Testing measure round trip under a weighting...', 'blue')}")
        v = random_potential(15, seed=1)
        atoms = np.linspace(-2.0, 2.0, 25)[:, None]
        # q - v = -0.5 on every atom
        u = Potential(EPS, v(atoms) - 0.5, atoms, COST_1D)
        mu = potential_to_measure(u, v)
        np.testing.assert_allclose(mu.weights, np.exp(-0.5 / EPS), rtol=1e-12)
        back = measure_to_potential(mu, v, EPS)
        np.testing.assert_allclose(back(GRID), u(GRID), rtol=0, atol=1e-10)
        print(f"{colored('✅ Round trip verified', 'green')}")

    def test_weight_above_one_is_corruption(self):
        v = random_potential(15, seed=1)
        atoms = np.linspace(-2.0, 2.0, 5)[:, None]
        u = Potential(EPS, v(atoms) + 1.0, atoms, COST_1D)
        with self.assertRaises(RepresentationCorruptionError):
            potential_to_measure(u, v)

    def test_mismatched_epsilon(self):
        u = random_potential(5, seed=2)
        v = Potential(2 * EPS, [0.0], [[0.0]], COST_1D)
        with self.assertRaises(ConfigurationError):
            potential_to_measure(u, v)

    def test_probe_error(self):
        u = random_potential(10, seed=3)
        self.assertEqual(compression_error_probe(u, u, GRID), 0.0)
        self.assertAlmostEqual(compression_error_probe(u, u.shift(0.25), GRID), 0.25, places=10)


class TestNNLS(unittest.TestCase):
    """Active-set nonnegative least squares"""

    def _check_kkt(self, A, b, result):
        x = result.x
        w = A.T @ (b - A @ x)
        scale = max(1.0, np.linalg.norm(A) * np.linalg.norm(b))
        self.assertTrue(np.all(x >= 0))
        self.assertTrue(np.all(w <= 1e-9 * scale))
        self.assertTrue(np.all(np.abs(w[x > 0]) <= 1e-9 * scale))

    @hsettings(max_examples=30, deadline=None)
    @given(st.integers(min_value=0, max_value=10_000), st.integers(min_value=3, max_value=25),
           st.integers(min_value=3, max_value=25))
    def test_kkt_and_agreement_with_scipy(self, seed, m, n):
        """KKT conditions hold and the residual matches scipy's solver"""
        rng = np.random.default_rng(seed)
        A = rng.normal(size=(m, n))
        b = rng.normal(size=m)
        result = nnls(A, b)
        self.assertTrue(result.converged)
        self._check_kkt(A, b, result)
        _, reference = scipy_nnls(A, b)
        self.assertAlmostEqual(result.residual, reference, delta=1e-8 * max(1.0, reference))

    def test_recovers_nonnegative_solution(self):
        print(f"\n{colored('Testing NNLS recovery...', 'blue')}")
        rng = np.random.default_rng(5)
        A = rng.normal(size=(40, 15))
        x_true = np.maximum(rng.normal(size=15), 0.0)
        result = nnls(A, A @ x_true)
        np.testing.assert_allclose(result.x, x_true, rtol=0, atol=1e-8)
        self.assertLess(result.residual, 1e-9)
        print(f"  iterations={result.iterations} residual={result.residual:.2e}")
        print(f"{colored('✅ NNLS recovery verified', 'green')}")

    def test_duplicate_columns(self):
        """Dependent columns are rejected, not factored"""
        rng = np.random.default_rng(6)
        base = rng.normal(size=(20, 6))
        A = np.hstack([base, base[:, :3]])
        b = rng.normal(size=20)
        result = nnls(A, b)
        self.assertTrue(result.converged)
        _, reference = scipy_nnls(A, b)
        self.assertAlmostEqual(result.residual, reference, delta=1e-8)

    def test_shape_mismatch(self):
        with self.assertRaises(AlignmentError):
            nnls(np.zeros((3, 2)), np.zeros(4))

    def test_scale_free_tolerance(self):
        """Scaling b by 1e-30 scales the solution and keeps the solve converged"""
        rng = np.random.default_rng(9)
        A = rng.normal(size=(30, 12))
        x_true = np.maximum(rng.normal(size=12), 0.0)
        full = nnls(A, A @ x_true)
        tiny = nnls(A, 1e-30 * (A @ x_true))
        self.assertTrue(tiny.converged)
        self.assertLess(tiny.tol, 1e-40)
        np.testing.assert_allclose(tiny.x, 1e-30 * full.x, rtol=1e-8, atol=1e-38)

    def test_rejected_columns_count_against_convergence(self):
        """A column refused as dependent but still violating the KKT conditions means no convergence"""
        A = np.array([[1.0, 0.6], [0.0, 0.8]])
        b = np.array([1.0, 1.0])
        solved = nnls(A, b)
        self.assertTrue(solved.converged)
        np.testing.assert_allclose(solved.x, [0.25, 1.25], atol=1e-12)

        # column 0 keeps 64% of its norm against column 1, below a 99% threshold
        with patch.object(sys.modules["stream_ot.core.compression.nnls"], "_DEPENDENCE_RATIO", 0.99):
            refused = nnls(A, b)
        self.assertFalse(refused.converged)
        self.assertEqual(refused.rejected, 1)
        self.assertAlmostEqual(refused.max_dual, 0.16, places=12)
        np.testing.assert_allclose(refused.x, [0.0, 1.4], atol=1e-12)


class TestGaussianQuadrature(unittest.TestCase):
    """m-point Gaussian quadrature of discrete 1D measures"""

    @hsettings(max_examples=100, deadline=None)
    @given(st.integers(min_value=0, max_value=100_000), st.integers(min_value=10, max_value=500),
           st.integers(min_value=2, max_value=10))
    def test_moment_exactness(self, seed, n, m):
        """Moments up to degree 2m - 1 and the total mass are preserved"""
        rng = np.random.default_rng(seed)
        atoms = rng.uniform(-3.0, 3.0, size=(n, 1))
        weights = rng.uniform(0.1, 1.0, size=n)
        mu = WeightedMeasure(atoms, weights)
        result = gq_compress(mu, m)
        self.assertFalse(result.no_op)
        self.assertLessEqual(result.measure.size, m)

        degree = 2 * m - 1
        original = mu.moments(degree)
        compressed = result.measure.moments(degree)
        absolute = np.vander(atoms[:, 0], degree + 1, increasing=True)
        scale = np.abs(absolute).T @ weights
        np.testing.assert_array_less(np.abs(compressed - original), 1e-8 * scale)
        self.assertAlmostEqual(result.measure.total_mass, mu.total_mass, delta=1e-12 * mu.total_mass)

    def test_nodes_inside_hull(self):
        mu = WeightedMeasure(np.linspace(0.0, 1.0, 50)[:, None], np.ones(50))
        nodes = gq_compress(mu, 6).measure.atoms[:, 0]
        self.assertTrue(np.all(nodes > 0.0) and np.all(nodes < 1.0))

    def test_no_op_when_too_few_atoms(self):
        """Asking for more nodes than distinct atoms returns the input"""
        mu = WeightedMeasure([[0.0], [1.0], [1.0]], [0.2, 0.3, 0.5])
        result = gq_compress(mu, 3)
        self.assertTrue(result.no_op)
        self.assertIs(result.measure, mu)

    def test_exact_on_small_measure(self):
        """With m equal to the number of atoms the measure is reproduced"""
        mu = WeightedMeasure([[-1.0], [0.5], [2.0]], [0.2, 0.3, 0.5])
        out = gq_compress(mu, 3).measure.merged()
        np.testing.assert_allclose(out.atoms[:, 0], [-1.0, 0.5, 2.0], atol=1e-12)
        np.testing.assert_allclose(out.weights, [0.2, 0.3, 0.5], atol=1e-12)

    def test_dimension_check(self):
        mu = WeightedMeasure(np.zeros((4, 2)) + np.arange(4)[:, None], np.ones(4))
        with self.assertRaises(ConfigurationError):
            gq_compress(mu, 2)

    def test_recurrence_matches_full_reorthogonalisation(self):
        """Long recurrences agree with Lanczos that reorthogonalises at every step"""
        print(f"\n{colored('Testing semi-orthogonal Lanczos...', 'blue')}")
        rng = np.random.default_rng(10)
        atoms = np.sort(rng.uniform(-1.0, 1.0, size=3000))
        weights = rng.uniform(0.5, 1.5, size=3000)
        m = 200
        alpha, beta = jacobi_matrix(atoms, weights, m)

        Q = np.zeros((m, atoms.size))
        ref_alpha, ref_beta = np.zeros(m), np.zeros(m - 1)
        Q[0] = np.sqrt(weights / weights.sum())
        for j in range(m):
            z = atoms * Q[j]
            ref_alpha[j] = Q[j] @ z
            if j == m - 1:
                break
            for _ in range(2):
                z -= Q[: j + 1].T @ (Q[: j + 1] @ z)
            ref_beta[j] = np.linalg.norm(z)
            Q[j + 1] = z / ref_beta[j]

        np.testing.assert_allclose(alpha, ref_alpha, rtol=0, atol=1e-8)
        np.testing.assert_allclose(beta, ref_beta, rtol=0, atol=1e-8)
        print(f"  max deviation alpha {np.abs(alpha - ref_alpha).max():.2e}, beta {np.abs(beta - ref_beta).max():.2e}")
        print(f"{colored('✅ Recurrence verified', 'green')}")


class TestFourierCompression(unittest.TestCase):
    """Fourier moment compression"""

    def setUp(self):
        rng = np.random.default_rng(7)
        self.mu = WeightedMeasure(rng.normal(size=(400, 1)), np.full(400, 1.0 / 400))

    def test_frequency_set(self):
        freqs = FrequencySet.qmc(8, 2, EPS)
        self.assertEqual(freqs.size, 8)
        np.testing.assert_array_equal(freqs.frequencies[0], [0.0, 0.0])
        self.assertAlmostEqual(freqs.kernel_scales()[0], EPS * np.pi)

    def test_moment_system_identity(self):
        """M w reproduces the right-hand side"""
        v = random_potential(10, seed=8)
        system = fourier_moment_system(self.mu, v, FrequencySet.qmc(16, 1, EPS))
        np.testing.assert_allclose(system.matrix @ self.mu.weights, system.rhs, rtol=1e-12, atol=1e-14)
        A, b = system.stacked()
        self.assertEqual(A.shape, (32, 400))
        self.assertEqual(b.shape, (32,))

    def test_underflowing_columns(self):
        """A weighting that spans more than exp(700) cannot be scaled"""
        v = Potential(0.01, [0.0], [[0.0]], COST_1D)
        mu = WeightedMeasure([[0.0], [3.0]], [0.5, 0.5])
        with self.assertRaises(ScalingError):
            fourier_moment_system(mu, v, FrequencySet.qmc(4, 1, 0.01))

    def test_residual_bound_and_size(self):
        """Compressed moments are within the solver residual and the support is O(m)"""
        print(f"\n{colored('Testing Fourier compression...', 'blue')}")
        for m in (16, 32):
            result = fourier_compress(self.mu, None, m, EPS)
            out = result.measure
            self.assertLessEqual(out.size, 2 * m)

            freqs = FrequencySet.qmc(m, 1, EPS)
            F = _fourier_features(self.mu.atoms, freqs)
            F_hat = _fourier_features(out.atoms, freqs)
            A, b = stack_real(F_hat, F @ self.mu.weights)
            moment_residual = np.linalg.norm(A @ out.weights - b)
            self.assertLessEqual(moment_residual, result.residual + 1e-10)
            mass_bound = result.residual / np.sqrt(EPS * np.pi) + 1e-12
            self.assertLessEqual(abs(out.total_mass - 1.0), mass_bound)
            print(f"  m={m:<3} atoms {self.mu.size} -> {out.size} residual {result.residual:.2e}")
        print(f"{colored('✅ Fourier compression verified', 'green')}")

    def test_invalid_size(self):
        with self.assertRaises(ConfigurationError):
            fourier_compress(self.mu, None, 0, EPS)

    def test_underflowing_weighting_is_refused(self):
        """The measure-level compressor refuses the same weighting"""
        v = Potential(0.01, [0.0], [[0.0]], COST_1D)
        mu = WeightedMeasure([[0.0], [3.0]], [0.5, 0.5])
        with self.assertRaises(ScalingError):
            fourier_compress(mu, v, 4, 0.01)


class TestCellCompression(unittest.TestCase):
    """Tilted cell-by-cell Fourier compression of potentials"""

    def test_tilt_recovers_a_quadratic(self):
        rng = np.random.default_rng(11)
        atoms = rng.normal(size=(60, 2))
        exact = GaussianTilt(center=atoms.mean(axis=0), const=0.7, slope=np.array([0.3, -1.1]), curvature=0.4)
        tilt = fit_tilt(atoms, exact(atoms))
        self.assertAlmostEqual(tilt.const, 0.7, places=10)
        np.testing.assert_allclose(tilt.slope, [0.3, -1.1], atol=1e-10)
        self.assertAlmostEqual(tilt.curvature, 0.4, places=10)
        self.assertAlmostEqual(tilt.kernel_epsilon(0.3), 0.5, places=10)

    def test_tilt_curvature_is_clamped(self):
        atoms = np.linspace(-1.0, 1.0, 21)[:, None]
        tilt = fit_tilt(atoms, 5.0 * atoms[:, 0] ** 2)
        self.assertAlmostEqual(tilt.curvature, 1.0 - settings.TILT_CURVATURE_MIN, places=12)
        self.assertAlmostEqual(tilt.kernel_epsilon(EPS), EPS / settings.TILT_CURVATURE_MIN, places=10)

    def test_partition_covers_every_atom_once(self):
        rng = np.random.default_rng(12)
        atoms = rng.normal(size=(1000, 2))
        cells = partition_atoms(atoms, 100)
        self.assertEqual(len(cells), cell_count(1000, 100))
        self.assertTrue(all(idx.size <= 100 for idx in cells))
        np.testing.assert_array_equal(np.sort(np.concatenate(cells)), np.arange(1000))
        with self.assertRaises(ConfigurationError):
            partition_atoms(atoms, 0)

    def test_extreme_atoms(self):
        self.assertEqual(extreme_directions(1).shape, (2, 1))
        self.assertEqual(extreme_directions(2).shape, (8, 2))
        atoms = np.array([[0.0, 0.0], [3.0, 0.0], [0.0, -2.0], [1.0, 1.0], [-1.0, 2.0]])
        idx = extreme_atoms(atoms, extreme_directions(2))
        for i in (1, 2, 4):
            self.assertIn(i, idx)
        self.assertNotIn(0, idx)

    def test_repeated_atoms_collapse_exactly(self):
        """400 atoms on 10 positions are rebuilt on those positions without error"""
        rng = np.random.default_rng(13)
        positions = np.linspace(-2.0, 2.0, 10)
        q_pos = 0.3 * positions ** 2 + 0.1 * rng.normal(size=10)
        atoms = np.repeat(positions, 40)[:, None]
        u = Potential(EPS, np.repeat(q_pos, 40) - EPS * np.log(40.0), atoms, COST_1D)
        compressed, result = fourier_compress_potential(u, 16)
        self.assertFalse(result.no_op)
        self.assertLessEqual(compressed.size, 2 * 16)
        self.assertLessEqual(compression_error_probe(u, compressed, GRID), 1e-6)

    def test_online_potential(self):
        """A potential from a short online run keeps its values with far fewer atoms"""
        print(f"\n{colored('Testing cell-wise compression of an online potential...', 'blue')}")
        alpha, beta = get_distribution_pair("gauss1d_paper")
        sched = Schedule(a=1.5, b=-0.6, epsilon=0.4)
        u = run_online_sinkhorn(alpha, beta, sched, T=5, seed=0).pair.f
        points = probe_grid(u.atoms)
        for m in (20, 40):
            compressed, result = fourier_compress_potential(u, m)
            err = compression_error_probe(u, compressed, points)
            print(f"  m={m:<3} atoms {u.size} -> {compressed.size}, sup error {err:.2e}")
            self.assertTrue(np.all(np.isfinite(compressed.weights)))
            self.assertLess(compressed.size, u.size)
            self.assertLess(err, 0.1)
        print(f"{colored('✅ Online potential compressed', 'green')}")

    def test_small_potential_is_left_alone(self):
        u = random_potential(20, seed=14)
        compressed, result = fourier_compress_potential(u, 16)
        self.assertTrue(result.no_op)
        self.assertEqual(compression_error_probe(u, compressed, GRID), 0.0)

    def test_wild_weights_are_refused(self):
        atoms = np.linspace(0.0, 1.0, 50)[:, None]
        q = np.zeros(50)
        q[25] = 1000.0
        with self.assertRaises(ScalingError):
            fourier_compress_potential(Potential(EPS, q, atoms, COST_1D), 4)
        with self.assertRaises(ConfigurationError):
            fourier_compress_potential(Potential(EPS, q, atoms, COST_1D), 0)


if __name__ == "__main__":
    unittest.main()

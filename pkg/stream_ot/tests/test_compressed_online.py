"""
Compressed Online Sinkhorn Tests
================================

Compression configuration, the compressed step, the cost model and the
decay monitor for recorded compression errors.
"""

import copy
import logging
import math
import unittest
from unittest.mock import patch

import numpy as np

from stream_ot.config import settings
from stream_ot.core.compressed_online import (
    CompressionConfig,
    compressed_step_cost,
    compression_decay_monitor,
    cos_step,
    run_compressed,
)
from stream_ot.core.compression import potential_to_measure
from stream_ot.core.compression.cells import cell_count, cell_size_limit
from stream_ot.core.constants.presets import get_distribution_pair
from stream_ot.core.online_sinkhorn import Schedule, Trace, TraceRow, os_step, run_online_sinkhorn, start_run
from stream_ot.errors import ConfigurationError, InsufficientDataError
from stream_ot.utils.helpers import colored

# Configure logging for tests
logging.basicConfig(level=logging.ERROR)

ALPHA, BETA = get_distribution_pair("gauss1d_paper")


def synthetic_trace(ms, errors) -> Trace:
    rows = []
    for i, (m, err) in enumerate(zip(ms, errors), start=1):
        rows.append(TraceRow(t=i, N=10 * i, support_f=m, support_g=m, err_succ_var=0.1,
                             dual_obj=0.0, wall_ms=float(i), comp_sup_err=err, m_t=m))
    return Trace(rows)


class TestCompressionConfig(unittest.TestCase):
    """Configuration checks"""

    def test_defaults(self):
        cfg = CompressionConfig()
        self.assertEqual(cfg.method, "fourier")
        self.assertEqual(cfg.trigger_N, 1000)
        self.assertEqual(cfg.every, 1)

    def test_invalid_values(self):
        print(f"\n{colored('Testing compression config validation...', 'blue')}")
        bad = [
            dict(method="pca"),
            dict(zeta=0.0),
            dict(trigger_N=0),
            dict(every=0),
            dict(method="gq", dimension=2),
        ]
        for kwargs in bad:
            with self.assertRaises(ConfigurationError):
                CompressionConfig(**kwargs)
            print(f"  {kwargs} {colored('rejected', 'yellow')}")
        CompressionConfig(method="gq", dimension=1)
        print(f"{colored('✅ Config validation verified', 'green')}")

    def test_gq_needs_one_dimension(self):
        alpha, beta = get_distribution_pair("gauss2d_paper")
        sched = Schedule(a=1.2, b=-0.6, epsilon=0.3)
        with self.assertRaises(ConfigurationError):
            run_compressed(alpha, beta, sched, CompressionConfig(method="gq"), T=2, seed=0)


class TestCompressedRuns(unittest.TestCase):
    """Runs with and without compression"""

    def test_no_compression_matches_online_sinkhorn(self):
        """method=none performs exactly the online Sinkhorn arithmetic"""
        sched = Schedule(a=1.2, b=-0.6, epsilon=0.3)
        plain = run_online_sinkhorn(ALPHA, BETA, sched, T=6, seed=3).trace
        cos = run_compressed(ALPHA, BETA, sched, CompressionConfig(method="none"), T=6, seed=3).trace
        for name in ("N", "support_f", "support_g", "err_succ_var", "dual_obj"):
            np.testing.assert_array_equal(plain.column(name), cos.column(name))
        self.assertEqual(cos.meta["compression_events"], 0)

    def test_online_step_evaluations(self):
        """An uncompressed step evaluates b*|g| + b*(|f| + b) kernel entries"""
        sched = Schedule(a=1.2, b=-0.6, epsilon=0.3)
        trace = run_compressed(ALPHA, BETA, sched, CompressionConfig(method="none"), T=5, seed=1).trace
        for prev, row in zip(trace.rows, trace.rows[1:]):
            b = sched.batch_size(row.t)
            self.assertEqual(row.kernel_evals, b * prev.support_g + b * (prev.support_f + b))

    def test_below_trigger_nothing_is_compressed(self):
        sched = Schedule(a=1.2, b=-0.6, epsilon=0.3)
        cfg = CompressionConfig(method="fourier", trigger_N=1000)
        result = run_compressed(ALPHA, BETA, sched, cfg, N_max=500, seed=0)
        trace = result.trace
        self.assertTrue(np.all(np.isnan(trace.column("comp_sup_err"))))
        np.testing.assert_array_equal(trace.column("support_f"), trace.column("N"))
        self.assertEqual(trace.meta["compression_events"], 0)
        self.assertEqual(trace.meta["compression_failures"], 0)

    def test_gq_run_bounds_supports(self):
        """Past the trigger every successful compression leaves at most m_t atoms per side"""
        print(f"\n{colored('Testing Gaussian-quadrature compressed run...', 'blue')}")
        sched = Schedule(a=1.5, b=-0.6, epsilon=0.4, zeta=0.95)
        cfg = CompressionConfig(method="gq", zeta=0.95, trigger_N=50, dimension=1)
        result = run_compressed(ALPHA, BETA, sched, cfg, T=8, seed=2)
        trace = result.trace
        events = trace.meta["compression_events"]
        failures = trace.meta["compression_failures"]
        self.assertGreaterEqual(events + failures, 1)
        self.assertEqual(len(trace.compression_events()), events)
        for row in trace.compression_events():
            self.assertEqual(row.m_t, sched.compression_size(row.t))
            self.assertLessEqual(row.support_f, row.m_t)
            self.assertLessEqual(row.support_g, row.m_t)
            self.assertTrue(math.isfinite(row.comp_sup_err) and row.comp_sup_err >= 0)
        if events:
            self.assertLess(trace.last.support_f, trace.last.N)
        print(f"  events={events} failures={failures} final support={trace.last.support_f} N={trace.last.N}")
        print(f"{colored('✅ Compressed run verified', 'green')}")

    def test_fourier_run_attempts_compression(self):
        sched = Schedule(a=1.5, b=-0.6, epsilon=0.4, zeta=0.95)
        cfg = CompressionConfig(method="fourier", zeta=0.95, trigger_N=50)
        trace = run_compressed(ALPHA, BETA, sched, cfg, T=6, seed=4).trace
        self.assertGreaterEqual(trace.meta["compression_events"] + trace.meta["compression_failures"], 1)
        self.assertEqual(len(trace), 6)

    def test_large_compression_size_changes_nothing(self):
        """When m_t exceeds both supports the compressed run is the online run"""
        sched = Schedule(a=1.2, b=-0.6, epsilon=0.3, zeta=0.05)
        cfg = CompressionConfig(method="fourier", zeta=0.05, trigger_N=1)
        plain = run_online_sinkhorn(ALPHA, BETA, sched, T=6, seed=3)
        cos = run_compressed(ALPHA, BETA, sched, cfg, T=6, seed=3)
        points = np.linspace(-4.0, 8.0, 16)[:, None]
        self.assertLessEqual(np.abs(plain.pair.f(points) - cos.pair.f(points)).max(), 1e-10)
        self.assertLessEqual(np.abs(plain.pair.g(points) - cos.pair.g(points)).max(), 1e-10)
        self.assertEqual(cos.trace.meta["compression_events"], 0)
        self.assertEqual(cos.trace.meta["compression_failures"], 0)
        self.assertFalse(cos.trace.meta["degraded"])

    def test_measures_handed_to_compression_are_bounded(self):
        """exp(q_i/eps) phi(y_i) lies in (0, 1] whenever compression runs"""
        print(f"\n{colored('Testing weights at compression events...', 'blue')}")
        sched = Schedule(a=1.5, b=-0.6, epsilon=0.4, zeta=0.95)
        cfg = CompressionConfig(method="gq", zeta=0.95, trigger_N=50, dimension=1)
        state, grids, _ = start_run(ALPHA, BETA, sched, seed=2)
        checked = 0
        for _ in range(8):
            # same draws as the step below
            plain = os_step(copy.deepcopy(state), sched)
            nxt = cos_step(state, sched, cfg, grids.probe_x, grids.probe_y)
            if state.n_t >= cfg.trigger_N:
                for mu in (potential_to_measure(plain.pair.f, plain.pair.g),
                           potential_to_measure(plain.pair.g, nxt.pair.f)):
                    self.assertTrue(np.all(mu.weights > 0))
                    self.assertLessEqual(mu.weights.max(), 1.0 + 1e-9)
                checked += 1
                print(f"  t={nxt.t} largest weight {mu.weights.max():.3e}")
            state = nxt
        self.assertGreater(checked, 0)
        print(f"{colored('✅ Weights bounded', 'green')}")

    def test_inaccurate_compressions_are_rejected(self):
        """With no error allowance every compression is undone and the run reports it"""
        sched = Schedule(a=1.5, b=-0.6, epsilon=0.4, zeta=0.95)
        cfg = CompressionConfig(method="fourier", zeta=0.95, trigger_N=50)
        with patch.object(settings, "COMPRESSION_ERROR_RATIO", 0.0), \
                patch.object(settings, "COMPRESSION_ERROR_FLOOR", 0.0):
            trace = run_compressed(ALPHA, BETA, sched, cfg, T=6, seed=4).trace
        self.assertEqual(trace.meta["compression_events"], 0)
        self.assertGreaterEqual(trace.meta["rejected_compressions"], 1)
        self.assertTrue(trace.meta["degraded"])
        np.testing.assert_array_equal(trace.column("support_f"), trace.column("N"))

    def test_fourier_compressions_are_kept(self):
        """Past the trigger the Fourier path shrinks the supports"""
        sched = Schedule(a=1.5, b=-0.6, epsilon=0.4, zeta=0.95)
        cfg = CompressionConfig(method="fourier", zeta=0.95, trigger_N=50)
        with patch.object(settings, "COMPRESSION_ERROR_RATIO", 1e12):
            trace = run_compressed(ALPHA, BETA, sched, cfg, T=6, seed=4).trace
        self.assertGreaterEqual(trace.meta["compression_events"], 1)
        self.assertFalse(trace.meta["degraded"])
        self.assertLess(trace.last.support_f, trace.last.N)
        for row in trace.compression_events():
            self.assertTrue(math.isfinite(row.comp_sup_err))

    def test_kernel_counts_follow_cost_model(self):
        """Counted evaluations of each compressed step stay within 4x of the model"""
        print(f"\n{colored('Testing kernel counts against the cost model...', 'blue')}")
        # b_t = m_t = t + 1
        sched = Schedule(a=0.5, b=-0.6, epsilon=0.5, zeta=1.1)
        cfg = CompressionConfig(method="fourier", zeta=1.1, trigger_N=1)
        trace = run_compressed(ALPHA, BETA, sched, cfg, T=100, seed=6).trace
        ratios = []
        for prev, row in zip(trace.rows, trace.rows[1:]):
            if row.t < 10:
                continue
            support = max(prev.support_f, prev.support_g)
            ratios.append(row.kernel_evals / compressed_step_cost(sched, row.t, support, method="fourier"))
        ratios = np.array(ratios)
        print(f"  measured / modelled in [{ratios.min():.2f}, {ratios.max():.2f}] over {ratios.size} steps")
        self.assertEqual(ratios.size, 91)
        self.assertTrue(np.all(ratios >= 0.25) and np.all(ratios <= 4.0))
        print(f"{colored('✅ Cost model verified', 'green')}")


class TestCostModel(unittest.TestCase):
    """Modelled evaluations of a compressed step"""

    def test_hand_computed_values(self):
        # a - b = 1.6 = zeta, so m_t = t + 1
        sched = Schedule(a=1.0, b=-0.6, epsilon=0.5, zeta=1.6)
        # b=9, m=3, n=19, one cell: 261 + 114 + 1856
        self.assertEqual(compressed_step_cost(sched, 2, 10, probes=16), 2231)
        # 261 + (551 + 114 + 290) + 1856
        self.assertEqual(compressed_step_cost(sched, 2, 10, method="gq", probes=16), 3072)

    def test_fourier_moments_split_over_cells(self):
        """Each of the 16 cells of 5000 atoms pays for its own share of 100 frequencies"""
        # b_t = m_t = t + 1
        sched = Schedule(a=0.5, b=-0.6, epsilon=0.5, zeta=1.1)
        m = sched.compression_size(99)
        self.assertEqual(m, 100)
        b = sched.batch_size(99)
        support = 5000 - b
        self.assertEqual(b, 100)
        self.assertEqual(cell_count(5000, cell_size_limit(5000, m)), 16)
        expected = b * support + b * 5000 + 2 * m * 5000 // 16 + 16 * (4 * 5000 + 4 * support)
        self.assertEqual(compressed_step_cost(sched, 99, support, probes=16), expected)

    def test_grows_with_support(self):
        sched = Schedule(a=1.2, b=-0.6, epsilon=0.3)
        for method in ("fourier", "gq"):
            self.assertLess(compressed_step_cost(sched, 3, 10, method=method),
                            compressed_step_cost(sched, 3, 100, method=method))
        with self.assertRaises(ConfigurationError):
            compressed_step_cost(sched, 0, 10)
        with self.assertRaises(ConfigurationError):
            compressed_step_cost(sched, 3, 10, method="none")


class TestDecayMonitor(unittest.TestCase):
    """Log-log decay of compression errors against m_t"""

    def test_recovers_power_law(self):
        print(f"\n{colored('Testing compression decay monitor...', 'blue')}")
        ms = [4, 8, 16, 32, 64, 128]
        report = compression_decay_monitor(synthetic_trace(ms, [m ** -1.5 for m in ms]))
        self.assertAlmostEqual(report.slope, -1.5, places=10)
        self.assertEqual(report.events, 6)
        self.assertAlmostEqual(report.min_error, 128 ** -1.5)
        print(f"  slope={report.slope:.4f} events={report.events}")
        print(f"{colored('✅ Decay monitor verified', 'green')}")

    def test_too_few_events(self):
        with self.assertRaises(InsufficientDataError):
            compression_decay_monitor(synthetic_trace([4, 8, 16], [0.1, 0.05, 0.02]))

    def test_errors_at_the_floor(self):
        """Zero errors cannot be fitted"""
        with self.assertRaises(InsufficientDataError):
            compression_decay_monitor(synthetic_trace([4, 8, 16, 32, 64], [0.1, 0.0, 0.0, 0.0, 0.0]))


if __name__ == "__main__":
    unittest.main()

"""
Tests for the rate service: SINR, closed-form bounds and Monte Carlo rates.
"""

import math
import os
import sys
import unittest

import numpy as np

# Add the simulator directory to the path
sys.path.insert(0, os.path.join(os.path.dirname(__file__), ".."))

from services.channel import draw_channel
from services.errors import NoActiveUsersError, ZFInfeasibleError
from services.precoding import compute_precoders, effective_channel_matrix
from services.rates import (
    METHOD_BOUND,
    METHOD_MONTE_CARLO,
    RateReport,
    bound_report,
    jensen_bound_estimate,
    mc_ergodic_rate,
    mrt_bound,
    mrt_bound_baseline,
    mrt_bound_uniform,
    mrt_rate_mc,
    sinr,
    sinr_all,
    zf_bound,
    zf_bound_baseline,
    zf_bound_uniform,
    zf_gain_expectation,
    zf_gain_oracle,
    zf_rate_mc,
)
from services.scenario import (
    SystemConfig,
    build_cache_state,
    derive_sets,
    draw_cache_state,
    uniform_power,
)
from services.streams import SCENARIO_STREAM, trial_rng


class TestInstantaneous(unittest.TestCase):
    """SINR and single-realization rates."""

    def setUp(self):
        self.config = SystemConfig(M=8, K=5, L_b=6, L_u=2, E0=10.0, sigma2=1.0)
        self.cs = draw_cache_state(self.config, trial_rng(4, 0, SCENARIO_STREAM))
        self.sets = derive_sets(self.cs)
        self.power = uniform_power(self.sets, self.config)
        self.channel = draw_channel(self.config, trial_rng(4, 0))

    def test_single_user_example(self):
        H = np.array([[1.0, 1.0]], dtype=complex)
        W = H / np.sqrt(2.0)
        self.assertAlmostEqual(sinr(0, H, W, np.array([1.0]), [], 1.0), 2.0, places=12)

    def test_vectorized_sinr_matches_scalar(self):
        precoder = compute_precoders("mrt", self.channel, self.sets)
        vector = sinr_all(self.channel.H, precoder, self.power, self.sets, 1.0)
        for k in range(self.config.K):
            if self.sets.is_active(k):
                scalar = sinr(k, self.channel.H, precoder, self.power, self.sets.U[k], 1.0)
                self.assertAlmostEqual(vector[k], scalar, places=10)
            else:
                self.assertTrue(math.isnan(vector[k]))

    def test_mrt_closed_expression_matches_pipeline(self):
        precoder = compute_precoders("mrt", self.channel, self.sets)
        rates = np.log2(1.0 + sinr_all(self.channel.H, precoder, self.power, self.sets, 1.0))
        for k in self.sets.active:
            direct = mrt_rate_mc(int(k), self.channel.H, self.sets.U[int(k)], self.power, 1.0)
            self.assertLess(abs(direct - rates[k]), 1e-9)

    def test_zf_closed_expression_matches_pipeline(self):
        precoder = compute_precoders("zf", self.channel, self.sets)
        rates = np.log2(1.0 + sinr_all(self.channel.H, precoder, self.power, self.sets, 1.0))
        for k in self.sets.active:
            k = int(k)
            Q = effective_channel_matrix(k, self.channel.H, self.sets.Lambda[k])
            direct = zf_rate_mc(k, Q, self.power.E[k], 1.0)
            self.assertLess(abs(direct - rates[k]), 1e-9)

    def test_jensen_estimate_below_mean_rate(self):
        samples = trial_rng(0, 0).exponential(3.0, size=5000)
        self.assertLessEqual(jensen_bound_estimate(samples), np.mean(np.log2(1.0 + samples)))


class TestClosedFormBounds(unittest.TestCase):
    """MRT and ZF ergodic-rate lower bounds."""

    def test_mrt_bound_example(self):
        rate = mrt_bound(0.5, 11, 1.25, [1.25] * 4, 1.0)
        self.assertAlmostEqual(rate, math.log2(1.0 + 6.25 / 3.5), places=12)
        self.assertAlmostEqual(rate, 1.47799, places=5)
        self.assertAlmostEqual(mrt_bound_uniform(0.5, 11, 4, 8, 10.0, 1.0), rate, places=12)

    def test_mrt_no_interference(self):
        self.assertAlmostEqual(mrt_bound(1.0, 2, 1.0, [], 1.0), 1.0, places=12)
        self.assertAlmostEqual(
            mrt_bound_baseline(0.5, 9, 1, 10.0, 1.0), math.log2(1.0 + 0.5 * 8 * 10.0), places=12
        )

    def test_mrt_large_system_points(self):
        K, p_u = 1e6, 0.51328
        proposed = mrt_bound_uniform(0.5, 1.1 * K, (K - 1) * p_u, 0.8 * K, 10.0, 1.0)
        baseline = mrt_bound_baseline(0.5, 1.8 * K, K, 10.0, 1.0)
        self.assertAlmostEqual(proposed, 1.3975, delta=1e-3)
        self.assertAlmostEqual(baseline, 1.3219, delta=1e-3)
        self.assertGreater(proposed, baseline)

    def test_mrt_uniform_without_active_users(self):
        with self.assertRaises(NoActiveUsersError):
            mrt_bound_uniform(0.5, 8, 0, 0, 10.0, 1.0)

    def test_zf_bound_examples(self):
        self.assertAlmostEqual(zf_bound(0.5, 11, 4, 1.25, 1.0), math.log2(4.75), places=12)
        self.assertAlmostEqual(zf_bound(1.0, 2, 0, 1.0, 1.0), 1.0, places=12)
        self.assertAlmostEqual(zf_bound_uniform(0.5, 11, 4, 8, 10.0, 1.0), math.log2(4.75), places=12)

    def test_zf_infeasible(self):
        with self.assertRaises(ZFInfeasibleError):
            zf_bound(1.0, 4, 4, 1.0, 1.0)
        with self.assertRaises(ZFInfeasibleError):
            zf_bound_baseline(1.0, 4, 5, 10.0, 1.0)

    def test_zf_cache_gain(self):
        K, p_u = 1e6, 0.51328
        proposed = zf_bound_uniform(0.5, 1.4 * K, (K - 1) * p_u, 0.8 * K, 10.0, 1.0)
        baseline = zf_bound_baseline(0.5, 1.4 * K, K, 10.0, 1.0)
        self.assertAlmostEqual(proposed / baseline - 1.0, 0.7097, delta=1e-3)

    def test_bounds_are_monotone_on_a_grid(self):
        antennas = range(20, 101, 10)
        interferers = range(0, 19, 3)
        powers = 10.0 ** (np.arange(-10, 31, 5) / 10.0)
        for n in interferers:
            mrt_rates = [mrt_bound_uniform(0.5, M, n, 20, 10.0, 1.0) for M in antennas]
            zf_rates = [zf_bound(0.5, M, n, 0.5, 1.0) for M in antennas]
            self.assertTrue(np.all(np.diff(mrt_rates) >= 0), f"MRT in M at N={n}")
            self.assertTrue(np.all(np.diff(zf_rates) >= 0), f"ZF in M at D={n}")
        for M in antennas:
            mrt_rates = [mrt_bound_uniform(0.5, M, n, 20, 10.0, 1.0) for n in interferers]
            zf_rates = [zf_bound(0.5, M, n, 0.5, 1.0) for n in interferers]
            self.assertTrue(np.all(np.diff(mrt_rates) <= 0), f"MRT in N at M={M}")
            self.assertTrue(np.all(np.diff(zf_rates) <= 0), f"ZF in D at M={M}")
            mrt_rates = [mrt_bound_uniform(0.5, M, 6, 20, E0, 1.0) for E0 in powers]
            zf_rates = [zf_bound_uniform(0.5, M, 6, 20, E0, 1.0) for E0 in powers]
            self.assertTrue(np.all(np.diff(mrt_rates) >= 0), f"MRT in SNR at M={M}")
            self.assertTrue(np.all(np.diff(zf_rates) >= 0), f"ZF in SNR at M={M}")

    def test_zf_gain_oracle(self):
        estimate, _ = zf_gain_oracle(8, 3, 1.0, 20000, trial_rng(6, 0))
        self.assertLess(abs(estimate / zf_gain_expectation(8, 3, 1.0) - 1.0), 0.02)


class TestMonteCarloRate(unittest.TestCase):
    """Monte Carlo ergodic rates."""

    def setUp(self):
        self.config = SystemConfig(M=32, K=24, L_b=100, L_u=20, beta=0.5, snr_db=10.0, sigma2=1.0)

    def test_mc_rate_exceeds_bound(self):
        for index in range(2):
            cs = draw_cache_state(self.config, trial_rng(21, index, SCENARIO_STREAM))
            for kind in ("mrt", "zf"):
                bound = bound_report(self.config, cs, kind)
                mc = mc_ergodic_rate(self.config, precoder_kind=kind, trials=2000, cache_state=cs)
                for k, rate in bound.per_user_rate.items():
                    self.assertGreaterEqual(mc.per_user_rate[k] + 3.0 * mc.stderr[k], rate)

    def test_thread_count_does_not_change_result(self):
        config = self.config.model_copy(update={"seed": 5})
        single = mc_ergodic_rate(config, "redraw", "zf", trials=150, threads=1)
        pooled = mc_ergodic_rate(config, "redraw", "zf", trials=150, threads=4)
        self.assertEqual(single.mean_rate, pooled.mean_rate)
        self.assertEqual(single.per_user_rate, pooled.per_user_rate)

    def test_report_fields(self):
        report = mc_ergodic_rate(self.config, trials=50)
        self.assertEqual(report.method, METHOD_MONTE_CARLO)
        self.assertEqual(report.trials, 50)
        self.assertAlmostEqual(report.sum_rate, sum(report.per_user_rate.values()), delta=1e-6 * report.sum_rate)
        self.assertGreaterEqual(report.inactive_users, 0.0)

    def test_infeasible_trials_raise(self):
        config = SystemConfig(M=4, K=8, L_u=0, precoder="zf")
        with self.assertRaises(ZFInfeasibleError):
            mc_ergodic_rate(config, trials=5)

    def test_all_cached_raises(self):
        config = SystemConfig(M=4, K=3, L_b=5, L_u=5)
        with self.assertRaises(NoActiveUsersError):
            mc_ergodic_rate(config, "redraw", trials=5)

    def test_baseline_mode_serves_every_user(self):
        cs = build_cache_state([set()] * 4, [0, 1, 2, 3], L_b=4)
        config = SystemConfig(M=8, K=4, L_b=4, L_u=0, mode="baseline")
        report = mc_ergodic_rate(config, trials=100, cache_state=cs)
        self.assertEqual(len(report.per_user_rate), 4)

    def test_report_validation(self):
        with self.assertRaises(ValueError):
            RateReport(per_user_rate={0: 1.0}, mean_rate=1.0, method=METHOD_BOUND, stderr={0: 0.1})
        with self.assertRaises(ValueError):
            RateReport(per_user_rate={0: -1.0}, mean_rate=1.0, method=METHOD_BOUND)


if __name__ == "__main__":
    unittest.main()

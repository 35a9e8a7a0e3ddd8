"""
Tests for the large-system RZF analysis.
"""

import math
import os
import sys
import unittest

import numpy as np

# Add the simulator directory to the path
sys.path.insert(0, os.path.join(os.path.dirname(__file__), ".."))

from services.asymptotics import (
    AsymptoticParams,
    asymptotic_report,
    finite_system_rzf_rate,
    g_closed,
    g_derivative,
    g_derivative_integral_oracle,
    g_integral_oracle,
    rzf_interference_power,
    rzf_rate,
    rzf_rate_baseline,
    rzf_rate_for_state,
    rzf_rate_uniform,
    rzf_signal_power,
)
from services.errors import InvalidRegularizerError
from services.scenario import SystemConfig, build_cache_state, derive_sets, uniform_power

RHO_GRID = (0.0, 0.25, 0.5, 1.0, 2.0)
XI_GRID = (1e-3, 1e-1, 1.0, 10.0)


class TestResolvent(unittest.TestCase):
    """Closed form of G(rho, xi) against its defining equation and quadrature."""

    def test_quadratic_residual(self):
        for rho in RHO_GRID:
            for xi in XI_GRID:
                G = g_closed(rho, xi)
                residual = abs(xi * G * G + (xi - 1.0 + rho) * G - 1.0)
                self.assertLess(residual, 1e-12, f"rho={rho}, xi={xi}")
                self.assertGreater(G, 0.0)

    def test_quadrature_oracle(self):
        for rho in RHO_GRID:
            for xi in XI_GRID:
                self.assertLess(
                    abs(g_closed(rho, xi) - g_integral_oracle(rho, xi)), 1e-6, f"rho={rho}, xi={xi}"
                )

    def test_derivative_against_finite_differences(self):
        for rho in RHO_GRID:
            for xi in XI_GRID:
                h = 1e-6 * xi
                numeric = (g_closed(rho, xi + h) - g_closed(rho, xi - h)) / (2.0 * h)
                analytic = g_derivative(rho, xi)
                self.assertLess(abs(numeric - analytic) / abs(analytic), 1e-6, f"rho={rho}, xi={xi}")

    def test_derivative_against_quadrature(self):
        for rho in (0.25, 0.5, 2.0):
            for xi in (0.1, 1.0):
                analytic = g_derivative(rho, xi)
                oracle = g_derivative_integral_oracle(rho, xi)
                self.assertLess(abs(oracle / analytic - 1.0), 1e-6)

    def test_no_load(self):
        self.assertAlmostEqual(g_closed(0.0, 0.5), 2.0, places=12)

    def test_invalid_regularizer(self):
        with self.assertRaises(InvalidRegularizerError):
            g_closed(0.5, 0.0)
        with self.assertRaises(InvalidRegularizerError):
            AsymptoticParams(rho=0.5, xi=-1.0)


class TestRZFRate(unittest.TestCase):
    """Deterministic RZF signal, interference and rate."""

    def test_params_drive_the_powers(self):
        params = AsymptoticParams(rho=0.5, xi=0.1)
        self.assertEqual(params.G, g_closed(0.5, 0.1))
        self.assertEqual(params.dG, g_derivative(0.5, 0.1))
        self.assertEqual(params.signal_power(100, 0.5, 0.125), rzf_signal_power(100, 0.5, 0.125, 0.5, 0.1))
        self.assertAlmostEqual(params.interference_power(0.5, 0.125), 0.0625 / (1.0 + params.G) ** 2, places=15)
        with self.assertRaises(InvalidRegularizerError):
            rzf_signal_power(100, 0.5, 0.125, 0.5, 0.0)

    def test_worked_example(self):
        interferers = [(0.125, 0.5, 0.1)] * 50
        rate = rzf_rate(100, 0.5, 0.125, interferers, 0.5, 0.1, 1.0)
        self.assertAlmostEqual(rate, 2.241, delta=1e-3)
        signal = rzf_signal_power(100, 0.5, 0.125, 0.5, 0.1)
        interference = rzf_interference_power(0.5, 0.125, 0.5, 0.1)
        self.assertAlmostEqual(rate, math.log2(1.0 + signal / (50 * interference + 1.0)), places=12)

    def test_signal_scales_with_antennas(self):
        small = rzf_signal_power(100, 0.5, 0.125, 0.5, 0.1)
        large = rzf_signal_power(256, 0.5, 0.125, 0.5, 0.1)
        self.assertAlmostEqual(large / small, 2.56, places=12)

    def test_uniform_matches_general_form(self):
        M, N, D, K_bar = 140.0, 51.0, 51.0, 80.0
        E = 10.0 / K_bar
        expected = rzf_rate(M, 0.5, E, [(E, D / M, 0.3)] * 51, D / M, 0.3, 1.0)
        self.assertAlmostEqual(rzf_rate_uniform(M, 0.5, N, D, K_bar, 10.0, 1.0, 0.3), expected, places=10)

    def test_baseline_is_uniform_without_caching(self):
        self.assertEqual(
            rzf_rate_baseline(140.0, 0.5, 100.0, 10.0, 1.0, 0.3),
            rzf_rate_uniform(140.0, 0.5, 99.0, 99.0, 100.0, 10.0, 1.0, 0.3),
        )

    def test_small_regularizer_beats_zf_bound(self):
        M, D, E = 1.4e6, 513279.0, 10.0 / 8e5
        zf_rate = math.log2(1.0 + 0.5 * (M - D - 1) * E)
        self.assertGreaterEqual(rzf_rate(M, 0.5, E, [], D / M, 1e-4, 1.0), zf_rate)

    def test_state_rates(self):
        config = SystemConfig(M=16, K=4, L_b=10, xi=0.2)
        cs = build_cache_state([{1}, {0}, set(), {3}], [0, 2, 1, 4], L_b=10)
        sets = derive_sets(cs)
        power = uniform_power(sets, config)
        report = asymptotic_report(config, cs)
        self.assertEqual(sorted(report.per_user_rate), [0, 1, 2, 3])
        interferers = [(power.E[l], sets.D[int(l)] / 16, 0.2) for l in sets.U[2]]
        expected = rzf_rate(16, 0.5, power.E[2], interferers, sets.D[2] / 16, 0.2, 1.0)
        self.assertAlmostEqual(rzf_rate_for_state(config, sets, power, 2), expected, places=12)
        self.assertIsNone(report.stderr)


class TestFiniteSystemConvergence(unittest.TestCase):
    """Finite-M Monte Carlo against the large-system limit."""

    def test_converges_at_256_antennas(self):
        M, beta, E, rho, xi = 256, 0.5, 0.125, 0.5, 0.1
        limit = rzf_rate(M, beta, E, [(E, rho, xi)] * 50, rho, xi, 1.0)
        report = finite_system_rzf_rate(M, beta, E, E, rho, xi, 50, 1.0, trials=20, seed=3)
        self.assertLess(abs(report.mean_rate / limit - 1.0), 0.05)
        self.assertEqual(list(report.per_user_rate), [0])

    def test_thread_count_does_not_change_result(self):
        single = finite_system_rzf_rate(32, 0.5, 0.5, 0.5, 0.25, 0.2, 4, 1.0, trials=12, seed=1)
        pooled = finite_system_rzf_rate(
            32, 0.5, 0.5, 0.5, 0.25, 0.2, 4, 1.0, trials=12, seed=1, threads=3
        )
        self.assertEqual(single.mean_rate, pooled.mean_rate)
        np.testing.assert_array_equal(single.stderr[0], pooled.stderr[0])


if __name__ == "__main__":
    unittest.main()

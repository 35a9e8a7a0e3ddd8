"""
Tests for the channel service.
"""

import os
import sys
import tempfile
import unittest

import numpy as np

# Add the simulator directory to the path
sys.path.insert(0, os.path.join(os.path.dirname(__file__), ".."))

from services.channel import (
    complex_gaussian,
    draw_channel,
    dump_realization,
    inv_norm_expectation,
    inv_norm_expectation_oracle,
)
from services.errors import ExpectationDivergesError
from services.scenario import SystemConfig
from services.streams import trial_rng


class TestChannel(unittest.TestCase):
    """Rayleigh fading draws."""

    def test_unit_variance(self):
        g = complex_gaussian(trial_rng(0, 0), (200, 100))
        self.assertAlmostEqual(np.mean(np.abs(g) ** 2), 1.0, delta=0.02)
        self.assertAlmostEqual(np.var(g.real), 0.5, delta=0.02)

    def test_path_loss_scaling(self):
        config = SystemConfig(M=8, K=3, beta=[0.25, 1.0, 4.0])
        channel = draw_channel(config, trial_rng(1, 0))
        self.assertEqual(channel.H.shape, (3, 8))
        np.testing.assert_allclose(channel.H, np.array([[0.5], [1.0], [2.0]]) * channel.G)

    def test_mean_channel_energy(self):
        config = SystemConfig(M=16, K=3, beta=[0.25, 1.0, 4.0])
        energy = np.zeros(3)
        draws = 4000
        for t in range(draws):
            H = draw_channel(config, trial_rng(4, t)).H
            energy += np.sum(np.abs(H) ** 2, axis=1)
        expected = 16 * np.array([0.25, 1.0, 4.0])
        np.testing.assert_allclose(energy / draws, expected, rtol=0.02)

    def test_same_seed_same_channel(self):
        config = SystemConfig(M=4, K=2)
        a = draw_channel(config, trial_rng(9, 4))
        b = draw_channel(config, trial_rng(9, 4))
        np.testing.assert_array_equal(a.H, b.H)

    def test_dump_realization(self):
        config = SystemConfig(M=5, K=3)
        channel = draw_channel(config, trial_rng(0, 0))
        with tempfile.TemporaryDirectory() as tmp:
            path = os.path.join(tmp, "h.bin")
            dump_realization(channel, path)
            self.assertEqual(os.path.getsize(path), 3 * 5 * 8)
            restored = np.fromfile(path, dtype="<c8").reshape(3, 5)
        np.testing.assert_allclose(restored, channel.H, rtol=1e-6, atol=1e-6)


class TestInverseNormOracle(unittest.TestCase):
    """E{1/||h||^2} = 1/(beta (M - 1))."""

    def test_oracle_matches_closed_form(self):
        for index, (M, beta) in enumerate(((4, 1.0), (11, 0.5))):
            estimate, stderr = inv_norm_expectation_oracle(M, beta, 20000, trial_rng(3, index))
            expected = inv_norm_expectation(M, beta)
            self.assertLess(abs(estimate / expected - 1.0), 0.02)
            self.assertGreater(stderr, 0.0)

    def test_single_antenna_diverges(self):
        with self.assertRaises(ExpectationDivergesError):
            inv_norm_expectation_oracle(1, 1.0, 100)
        with self.assertRaises(ExpectationDivergesError):
            inv_norm_expectation(1, 1.0)


if __name__ == "__main__":
    unittest.main()

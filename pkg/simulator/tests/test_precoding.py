"""
Tests for the MRT, ZF and RZF precoders.
"""

import os
import sys
import unittest

import numpy as np

# Add the simulator directory to the path
sys.path.insert(0, os.path.join(os.path.dirname(__file__), ".."))

from services.channel import complex_gaussian, draw_channel
from services.errors import (
    DegenerateChannelError,
    InvalidRegularizerError,
    ZFInfeasibleError,
)
from services.precoding import (
    compute_precoders,
    effective_channel_matrix,
    mrt,
    rzf,
    zf,
    zf_solution,
)
from services.scenario import SystemConfig, build_cache_state, derive_sets
from services.streams import trial_rng


class TestMRT(unittest.TestCase):
    """Maximum-ratio transmission."""

    def test_unit_norm_and_real_gain(self):
        h = complex_gaussian(trial_rng(0, 0), 16)
        w = mrt(h)
        self.assertAlmostEqual(np.linalg.norm(w), 1.0, places=12)
        gain = np.vdot(h, w)
        self.assertAlmostEqual(gain.imag, 0.0, places=12)
        self.assertAlmostEqual(gain.real, np.linalg.norm(h), places=12)

    def test_two_antenna_example(self):
        np.testing.assert_allclose(mrt(np.array([1.0, 1.0])), np.array([1.0, 1.0]) / np.sqrt(2))

    def test_zero_channel(self):
        with self.assertRaises(DegenerateChannelError):
            mrt(np.zeros(4))


class TestZF(unittest.TestCase):
    """Cache-reduced zero-forcing."""

    def setUp(self):
        self.H = complex_gaussian(trial_rng(1, 0), (6, 8))

    def test_nulls_protected_users(self):
        Lambda = [1, 3, 4]
        w = zf(0, self.H, Lambda)
        self.assertAlmostEqual(np.linalg.norm(w), 1.0, places=12)
        for l in Lambda:
            self.assertLess(abs(np.vdot(self.H[l], w)), 1e-10)
        gain = np.vdot(self.H[0], w)
        self.assertGreater(gain.real, 0.0)
        self.assertAlmostEqual(gain.imag, 0.0, places=10)

    def test_empty_constraint_set_is_mrt(self):
        np.testing.assert_allclose(zf(2, self.H, []), mrt(self.H[2]), atol=1e-12)

    def test_unnormalized_gain_is_one(self):
        Q = effective_channel_matrix(0, self.H, [1, 3, 4])
        v = zf_solution(Q)
        self.assertAlmostEqual(abs(np.vdot(self.H[0], v)), 1.0, places=10)

    def test_orthogonal_constraints_give_mrt(self):
        H = self.H.copy()
        for l in (1, 2):
            H[l] -= np.vdot(H[0], H[l]) / np.vdot(H[0], H[0]) * H[0]
            self.assertLess(abs(np.vdot(H[0], H[l])), 1e-12)
        np.testing.assert_allclose(zf(0, H, [1, 2]), mrt(H[0]), atol=1e-10)

    def test_ignores_order_of_unconstrained_users(self):
        Lambda = [1, 3]
        w = zf(0, self.H, Lambda)
        # users 2, 4 and 5 are neither served nor protected
        for order in ([0, 1, 5, 3, 2, 4], [0, 1, 4, 3, 5, 2]):
            np.testing.assert_array_equal(zf(0, self.H[order], Lambda), w)

    def test_too_many_constraints(self):
        H = complex_gaussian(trial_rng(1, 1), (6, 4))
        with self.assertRaises(ZFInfeasibleError):
            zf(0, H, [1, 2, 3, 4])

    def test_rank_deficient(self):
        H = self.H.copy()
        H[2] = H[1]
        with self.assertRaises(ZFInfeasibleError):
            zf(0, H, [1, 2])


class TestRZF(unittest.TestCase):
    """Cache-reduced regularized zero-forcing."""

    def setUp(self):
        self.G = complex_gaussian(trial_rng(2, 0), (6, 10))
        self.Lambda = [1, 2, 5]

    def test_matches_primal_formula(self):
        alpha = 0.7
        F = self.G[[0] + self.Lambda]
        A = F.T @ F.conj() + alpha * np.eye(10)
        v = np.linalg.solve(A, self.G[0])
        v = v / np.linalg.norm(v)
        inner = np.vdot(self.G[0], v)
        v = v * np.conj(inner) / abs(inner)
        np.testing.assert_allclose(rzf(0, self.G, self.Lambda, alpha), v, atol=1e-10)

    def test_primal_branch_when_overloaded(self):
        G = complex_gaussian(trial_rng(2, 1), (8, 4))
        Lambda = [1, 2, 3, 4, 5]
        alpha = 0.3
        F = G[[0] + Lambda]
        v = np.linalg.solve(F.T @ F.conj() + alpha * np.eye(4), G[0])
        w = rzf(0, G, Lambda, alpha)
        self.assertAlmostEqual(abs(np.vdot(v / np.linalg.norm(v), w)), 1.0, places=10)

    def test_large_regularizer_tends_to_mrt(self):
        w = rzf(0, self.G, self.Lambda, 1e9)
        np.testing.assert_allclose(w, mrt(self.G[0]), atol=1e-6)

    def test_zero_regularizer_is_zf(self):
        np.testing.assert_allclose(
            rzf(0, self.G, self.Lambda, 0.0), zf(0, self.G, self.Lambda), atol=1e-9
        )

    def test_no_constraints_is_mrt_for_any_regularizer(self):
        for alpha in (1e-3, 0.5, 10.0, 1e4):
            np.testing.assert_allclose(rzf(3, self.G, [], alpha), mrt(self.G[3]), atol=1e-12)

    def test_small_regularizer_approaches_zf(self):
        np.testing.assert_allclose(
            rzf(0, self.G, self.Lambda, 1e-8), zf(0, self.G, self.Lambda), atol=1e-4
        )

    def test_ignores_order_of_unconstrained_users(self):
        w = rzf(0, self.G, self.Lambda, 0.7)
        # users 3 and 4 are neither served nor protected
        np.testing.assert_array_equal(rzf(0, self.G[[0, 1, 2, 4, 3, 5]], self.Lambda, 0.7), w)

    def test_negative_regularizer(self):
        with self.assertRaises(InvalidRegularizerError):
            rzf(0, self.G, self.Lambda, -1.0)


class TestComputePrecoders(unittest.TestCase):
    """Precoders for every active user of a cache state."""

    def setUp(self):
        self.config = SystemConfig(M=6, K=4, L_b=10)
        self.channel = draw_channel(self.config, trial_rng(3, 0))
        # user 0 requests a file it caches itself
        cs = build_cache_state([{0}, {1}, {2}, set()], [0, 5, 6, 1], L_b=10)
        self.sets = derive_sets(cs)

    def test_inactive_users_have_zero_rows(self):
        for kind, alpha in (("mrt", None), ("zf", None), ("rzf", 0.6)):
            precoder = compute_precoders(kind, self.channel, self.sets, alpha=alpha)
            self.assertTrue(np.all(precoder.W[0] == 0))
            for k in self.sets.active:
                self.assertAlmostEqual(np.linalg.norm(precoder.vector(int(k))), 1.0, places=12)

    def test_zf_respects_lambda(self):
        precoder = compute_precoders("zf", self.channel, self.sets)
        for k in self.sets.active:
            for l in self.sets.Lambda[int(k)]:
                self.assertLess(abs(np.vdot(self.channel.H[l], precoder.W[k])), 1e-10)

    def test_rzf_needs_regularizer(self):
        with self.assertRaises(InvalidRegularizerError):
            compute_precoders("rzf", self.channel, self.sets)

    def test_rzf_rejects_non_positive_regularizer(self):
        for alpha in (0.0, -0.5):
            with self.assertRaises(InvalidRegularizerError):
                compute_precoders("rzf", self.channel, self.sets, alpha=alpha)

    def test_unknown_kind(self):
        with self.assertRaises(ValueError):
            compute_precoders("mmse", self.channel, self.sets)


if __name__ == "__main__":
    unittest.main()

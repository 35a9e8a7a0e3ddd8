"""
Validation suite: statistical oracles, closed-form identities and the
cross-series properties of the two sweeps, each reported as one CheckResult.

The quick suite uses reduced sample sizes; run_checks(full=True) uses the
acceptance-scale sizes (10^6 caching draws, 10^4 or 10^5 trials).
"""

import logging
import math
import time
from dataclasses import dataclass
from typing import Callable, List, Optional

import numpy as np

from services.analysis import (
    DEFAULT_L_U_GRID,
    DEFAULT_RHO0_GRID,
    LARGE_SYSTEM_K,
    caching_statistics,
    expected_counts,
    mc_offload_fraction,
    mc_validate_pu,
    sweep_cache_size,
    sweep_rho0,
)
from services.asymptotics import (
    finite_system_rzf_rate,
    g_closed,
    g_derivative,
    g_integral_oracle,
    rzf_rate,
)
from services.channel import inv_norm_expectation, inv_norm_expectation_oracle
from services.rates import (
    bound_report,
    mc_ergodic_rate,
    mrt_bound_baseline,
    mrt_bound_uniform,
    zf_bound_baseline,
    zf_bound_uniform,
    zf_gain_expectation,
    zf_gain_oracle,
)
from services.scenario import SystemConfig, draw_cache_state
from services.streams import ORACLE_STREAM, SCENARIO_STREAM, trial_rng

logger = logging.getLogger(__name__)

# Operating point of the caching and cache-size results.
REFERENCE = dict(L_b=100, L_u=20, beta=0.5, snr_db=10.0, sigma2=1.0)
RHO_GRID = (0.0, 0.25, 0.5, 1.0, 2.0)
XI_GRID = (1e-3, 1e-1, 1.0, 10.0)
MONOTONE_TOLERANCE = 1e-6


@dataclass
class CheckResult:
    """Outcome of one validation check."""

    name: str
    passed: bool
    value: Optional[float] = None
    expected: Optional[float] = None
    detail: str = ""


def _reference_config(**overrides) -> SystemConfig:
    return SystemConfig(**{**REFERENCE, **overrides})


def check_caching_probability(full: bool, seed: int) -> List[CheckResult]:
    stats = caching_statistics(100, 20)
    draws = 1_000_000 if full else 100_000
    estimate, stderr = mc_validate_pu(100, 20, draws, seed=seed)
    return [
        CheckResult(
            "caching probability p_u (closed form)",
            abs(stats.p_u - 0.51328) < 1e-12,
            stats.p_u,
            0.51328,
        ),
        CheckResult(
            "caching probability p_u (Monte Carlo)",
            abs(estimate - stats.p_u) <= 3.0 * stderr,
            estimate,
            stats.p_u,
            f"{draws} draws, stderr {stderr:.2e}",
        ),
    ]


def check_offload_fraction(full: bool, seed: int) -> List[CheckResult]:
    stats = caching_statistics(100, 20, K=100)
    draws = 10_000 if full else 1_000
    fraction, stderr = mc_offload_fraction(_reference_config(M=100, K=100), draws, seed=seed)
    return [
        CheckResult(
            "active fraction E{K_bar}/K (closed form)",
            abs(stats.expected_K_bar / stats.K - 0.8) < 1e-12,
            stats.expected_K_bar / stats.K,
            0.8,
        ),
        CheckResult(
            "active fraction E{K_bar}/K (Monte Carlo)",
            abs(fraction - 0.8) <= 0.01,
            fraction,
            0.8,
            f"{draws} draws of K=100 users, stderr {stderr:.2e}",
        ),
    ]


def check_non_interfering_fraction(full: bool, seed: int) -> List[CheckResult]:
    value = caching_statistics(100, 20).non_interfering_fraction
    return [
        CheckResult(
            "non-interfering fraction 1 - p_u",
            round(value, 3) == 0.487 and abs(value - 0.48672) < 1e-12,
            value,
            0.48672,
        )
    ]


def check_zf_cache_gain(full: bool, seed: int) -> List[CheckResult]:
    stats = caching_statistics(100, 20)
    counts = expected_counts(stats, 1.4, LARGE_SYSTEM_K)
    E0 = 10.0
    proposed = zf_bound_uniform(0.5, counts.M, counts.D, counts.K_bar, E0, 1.0)
    baseline = zf_bound_baseline(0.5, counts.M, counts.K, E0, 1.0)
    gain = proposed / baseline - 1.0
    return [
        CheckResult(
            "ZF cache gain at rho0=1.4, L_u=20",
            0.68 <= gain <= 0.72,
            gain,
            0.701,
            "accepted band [0.68, 0.72]",
        )
    ]


def _proposed_dominates(result, tolerance: float = MONOTONE_TOLERANCE) -> bool:
    return all(
        np.all(result.rate(p, "proposed") >= result.rate(p, "baseline") - tolerance)
        for p in ("mrt", "zf", "rzf")
    )


def check_rho0_sweep(full: bool, seed: int, threads: int = 1) -> List[CheckResult]:
    template = _reference_config(seed=seed)
    result = sweep_rho0(template, DEFAULT_RHO0_GRID, threads=threads)

    stats = caching_statistics(100, 20)
    at_1_1 = expected_counts(stats, 1.1, LARGE_SYSTEM_K)
    at_1_8 = expected_counts(stats, 1.8, LARGE_SYSTEM_K)
    mrt_proposed = mrt_bound_uniform(0.5, at_1_1.M, at_1_1.N, at_1_1.K_bar, 10.0, 1.0)
    mrt_baseline = mrt_bound_baseline(0.5, at_1_8.M, at_1_8.K, 10.0, 1.0)

    rzf, zf, mrt = (result.rate(p, "proposed") for p in ("rzf", "zf", "mrt"))
    return [
        CheckResult("rho0 sweep: proposed >= baseline", _proposed_dominates(result)),
        CheckResult(
            "MRT proposed at rho0=1.1 >= MRT baseline at rho0=1.8",
            mrt_proposed >= mrt_baseline,
            mrt_proposed,
            mrt_baseline,
        ),
        CheckResult(
            "rho0 sweep: RZF >= ZF >= MRT (proposed)",
            bool(np.all(rzf >= zf - MONOTONE_TOLERANCE) and np.all(zf >= mrt)),
        ),
        CheckResult(
            "rho0 sweep: ZF strictly increasing",
            all(np.all(np.diff(result.rate("zf", m)) > 0) for m in ("proposed", "baseline")),
        ),
    ]


def check_cache_sweep(full: bool, seed: int, threads: int = 1) -> List[CheckResult]:
    template = _reference_config(seed=seed)
    result = sweep_cache_size(template, DEFAULT_L_U_GRID, rho0=1.4, threads=threads)

    nondecreasing = all(
        np.all(np.diff(result.rate(p, "proposed")) >= -MONOTONE_TOLERANCE)
        for p in ("mrt", "zf", "rzf")
    )
    constant = all(
        np.ptp(result.rate(p, "baseline")) <= MONOTONE_TOLERANCE for p in ("mrt", "zf", "rzf")
    )
    rzf = result.rate("rzf", "proposed")
    best = all(
        np.all(rzf >= result.rate(p, "proposed") - MONOTONE_TOLERANCE) for p in ("mrt", "zf")
    )
    zero = all(
        abs(result.rate(p, "proposed")[0] - result.rate(p, "baseline")[0]) <= MONOTONE_TOLERANCE
        for p in ("mrt", "zf", "rzf")
    )
    return [
        CheckResult("cache sweep: proposed nondecreasing in L_u", nondecreasing),
        CheckResult("cache sweep: baseline constant in L_u", constant),
        CheckResult("cache sweep: RZF best at every L_u", best),
        CheckResult("cache sweep: proposed equals baseline at L_u=0", zero),
        CheckResult("cache sweep: proposed >= baseline", _proposed_dominates(result)),
    ]


def check_inverse_norm_oracle(full: bool, seed: int) -> List[CheckResult]:
    trials = 100_000 if full else 20_000
    results = []
    for index, (M, beta) in enumerate(((4, 1.0), (11, 0.5))):
        estimate, _ = inv_norm_expectation_oracle(
            M, beta, trials, trial_rng(seed, index, ORACLE_STREAM)
        )
        expected = inv_norm_expectation(M, beta)
        results.append(
            CheckResult(
                f"E{{1/||h||^2}} oracle (M={M}, beta={beta})",
                abs(estimate / expected - 1.0) <= 0.02,
                estimate,
                expected,
                f"{trials} trials",
            )
        )
    return results


def check_zf_gain_oracle(full: bool, seed: int) -> List[CheckResult]:
    trials = 100_000 if full else 20_000
    estimate, _ = zf_gain_oracle(8, 3, 1.0, trials, trial_rng(seed, 2, ORACLE_STREAM))
    expected = zf_gain_expectation(8, 3, 1.0)
    return [
        CheckResult(
            "E{||Q(Q^H Q)^-1 e1||^2} oracle (M=8, D=3, beta=1)",
            abs(estimate / expected - 1.0) <= 0.02,
            estimate,
            expected,
            f"{trials} trials",
        )
    ]


def check_g_identities(full: bool, seed: int) -> List[CheckResult]:
    worst_residual = worst_oracle = worst_derivative = 0.0
    for rho in RHO_GRID:
        for xi in XI_GRID:
            G = g_closed(rho, xi)
            residual = abs(xi * G * G + (xi - 1.0 + rho) * G - 1.0)
            worst_residual = max(worst_residual, residual)
            worst_oracle = max(worst_oracle, abs(G - g_integral_oracle(rho, xi)))
            h = 1e-6 * xi
            numeric = (g_closed(rho, xi + h) - g_closed(rho, xi - h)) / (2.0 * h)
            analytic = g_derivative(rho, xi)
            worst_derivative = max(worst_derivative, abs(numeric - analytic) / abs(analytic))
    return [
        CheckResult("G quadratic residual", worst_residual < 1e-12, worst_residual, 0.0),
        CheckResult("G closed form vs quadrature", worst_oracle < 1e-6, worst_oracle, 0.0),
        CheckResult("dG/dxi vs finite differences", worst_derivative < 1e-6, worst_derivative, 0.0),
    ]


def check_jensen_ordering(full: bool, seed: int, threads: int = 1) -> List[CheckResult]:
    trials = 10_000 if full else 2_000
    config = SystemConfig(M=32, K=24, L_b=100, L_u=20, beta=0.5, snr_db=10.0, sigma2=1.0, seed=seed)
    results = []
    for precoder in ("mrt", "zf"):
        worst = math.inf
        for index in range(5):
            cs = draw_cache_state(config, trial_rng(seed, 1000 + index, SCENARIO_STREAM))
            bound = bound_report(config, cs, precoder)
            mc = mc_ergodic_rate(
                config, precoder_kind=precoder, trials=trials, cache_state=cs, threads=threads
            )
            for k, rate in bound.per_user_rate.items():
                margin = (mc.per_user_rate[k] + 3.0 * mc.stderr[k]) - rate
                worst = min(worst, margin)
        results.append(
            CheckResult(
                f"Jensen ordering ({precoder.upper()}): MC rate >= closed-form bound",
                worst >= 0.0,
                worst,
                0.0,
                f"smallest 3-sigma margin over 5 cache states, {trials} trials",
            )
        )
    return results


def check_rzf_convergence(full: bool, seed: int, threads: int = 1) -> List[CheckResult]:
    M, beta, E, rho, xi, n = 256, 0.5, 0.125, 0.5, 0.1, 50
    trials = 200 if full else 20
    expected = rzf_rate(M, beta, E, [(E, rho, xi)] * n, rho, xi, 1.0)
    report = finite_system_rzf_rate(
        M, beta, E, E, rho, xi, n, 1.0, trials, seed=seed, threads=threads
    )
    relative = abs(report.mean_rate / expected - 1.0)
    return [
        CheckResult(
            "RZF finite-M rate vs large-system limit (M=256)",
            relative <= 0.05,
            report.mean_rate,
            expected,
            f"relative deviation {relative:.4f}, {trials} trials",
        )
    ]


CHECKS: List[Callable[..., List[CheckResult]]] = [
    check_caching_probability,
    check_offload_fraction,
    check_non_interfering_fraction,
    check_zf_cache_gain,
    check_rho0_sweep,
    check_cache_sweep,
    check_inverse_norm_oracle,
    check_zf_gain_oracle,
    check_g_identities,
    check_jensen_ordering,
    check_rzf_convergence,
]

_THREADED = {check_rho0_sweep, check_cache_sweep, check_jensen_ordering, check_rzf_convergence}


def run_checks(
    full: bool = False,
    seed: int = 0,
    threads: int = 1,
    logger: Optional[logging.Logger] = None,
) -> List[CheckResult]:
    """Run every check and return the results in a fixed order."""
    logger = logger or logging.getLogger(__name__)
    results: List[CheckResult] = []
    for check in CHECKS:
        started = time.perf_counter()
        kwargs = {"threads": threads} if check in _THREADED else {}
        try:
            outcome = check(full, seed, **kwargs)
        except Exception as e:
            logger.error(f"Check {check.__name__} raised: {e}", exc_info=True)
            outcome = [CheckResult(check.__name__, False, detail=f"{type(e).__name__}: {e}")]
        for result in outcome:
            level = logging.INFO if result.passed else logging.WARNING
            logger.log(level, f"{'PASS' if result.passed else 'FAIL'} {result.name}")
        logger.debug(f"{check.__name__} took {time.perf_counter() - started:.2f}s")
        results.extend(outcome)
    return results

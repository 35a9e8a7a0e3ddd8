"""
Analysis service: the probabilistic caching model, the RZF regularizer
search and the parameter sweeps over antennas-per-user and cache size.

Sweeps evaluate every grid point independently (see streams.point_seed),
so a SweepResult depends only on the template, the grid and the seed.
"""

import logging
import math
import time
from dataclasses import dataclass, field
from datetime import datetime, timezone
from typing import Any, Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np

from services.asymptotics import rzf_rate_baseline, rzf_rate_uniform
from services.errors import (
    ConfigError,
    InfeasibleScenarioError,
    NoActiveUsersError,
    NumericalError,
    OptimizerDomainError,
    ZFInfeasibleError,
)
from services.rates import (
    METHOD_ASYMPTOTIC,
    METHOD_BOUND,
    METHOD_MONTE_CARLO,
    mc_ergodic_rate,
    mrt_bound_baseline,
    mrt_bound_uniform,
    zf_bound_baseline,
    zf_bound_uniform,
)
from services.scenario import SystemConfig, draw_cache_state
from services.streams import (
    ORACLE_STREAM,
    SCENARIO_STREAM,
    blocks,
    map_ordered,
    point_seed,
    trial_rng,
)

logger = logging.getLogger(__name__)

LARGE_SYSTEM_K = 1e6
FINITE_K = 64
XI_RANGE = (1e-4, 1e2)
COARSE_PROBES = 32
XI_RELATIVE_WIDTH = 1e-4

EVALUATIONS = ("large-system", "finite", "monte-carlo")
PLACEMENTS = ("independent", "fixed-size")
PRECODERS = ("mrt", "zf", "rzf")
MODES = ("proposed", "baseline")

# Default grids of the two sweeps.
DEFAULT_RHO0_GRID = tuple(np.geomspace(1.05, 3.0, 40).tolist())
DEFAULT_L_U_GRID = tuple(range(0, 55, 5))
DEFAULT_CACHE_SWEEP_RHO0 = 1.4

SeriesKey = Tuple[str, str, str]  # (precoder, mode, method)

_INV_PHI = (math.sqrt(5.0) - 1.0) / 2.0


# ---------------------------------------------------------------------------
# Probabilistic caching model
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class CachingStatistics:
    """Interference probability and expected set sizes of the random caching model."""

    L_b: int
    L_u: float
    K: float
    p: float
    p_u: float
    p_u1: float  # the two users request different files
    p_u2: float  # the two users request the same file
    expected_K_bar: float
    expected_N: float
    expected_D: float

    @property
    def non_interfering_fraction(self) -> float:
        return 1.0 - self.p_u

    @property
    def offload_fraction(self) -> float:
        return self.p


def caching_statistics(L_b: int, L_u: float, K: float = 1) -> CachingStatistics:
    """
    Closed-form caching statistics.

    L_u may be real-valued, so any caching probability p = L_u / L_b is reachable.
    """
    if L_b < 1:
        raise ValueError(f"library size L_b must be at least 1, got {L_b}")
    if not 0 <= L_u <= L_b:
        raise ValueError(f"cache size L_u={L_u} must lie in [0, L_b={L_b}]")
    if K < 1:
        raise ValueError(f"user count K must be at least 1, got {K}")

    p = L_u / L_b
    p_u1 = (1.0 - 1.0 / L_b) * (1.0 - p) ** 3
    p_u2 = (1.0 / L_b) * (1.0 - p) ** 2
    p_u = p_u1 + p_u2
    return CachingStatistics(
        L_b=L_b,
        L_u=L_u,
        K=K,
        p=p,
        p_u=p_u,
        p_u1=p_u1,
        p_u2=p_u2,
        expected_K_bar=(1.0 - p) * K,
        expected_N=(K - 1) * p_u,
        expected_D=(K - 1) * p_u,
    )


@dataclass(frozen=True)
class ExpectedCounts:
    """Antenna count and expected set sizes at one operating point."""

    K: float
    M: float
    N: float
    D: float
    K_bar: float
    rounded: bool


def round_half_up(x: float) -> int:
    return int(math.floor(x + 0.5))


def expected_counts(
    stats: CachingStatistics, rho0: float, K: float, rounding: bool = False
) -> ExpectedCounts:
    """
    M = rho0 K, N_k = D_k = (K - 1) p_u and K_bar = (1 - p) K.

    With rounding every count is taken to the nearest integer (halves round up).
    """
    M = rho0 * K
    N = (K - 1) * stats.p_u
    K_bar = (1.0 - stats.p) * K
    if rounding:
        K = round_half_up(K)
        M, N, K_bar = round_half_up(M), round_half_up(N), round_half_up(K_bar)
    return ExpectedCounts(K=K, M=M, N=N, D=N, K_bar=K_bar, rounded=rounding)


def mc_validate_pu(
    L_b: int,
    L_u: float,
    draws: int,
    seed: int = 0,
    placement: str = "independent",
) -> Tuple[float, float]:
    """
    Empirical probability that an active user l interferes with an active user k.

    Counts the event {c_ll = 1, c_kk = 1, c_lk = 1} over independent
    (cache, request) pairs of two users.

    Args:
        placement: "independent" caches every file independently with
            probability p = L_u / L_b; "fixed-size" caches exactly L_u
            distinct files per user (L_u must then be an integer)

    Returns:
        (frequency, standard error)
    """
    if draws < 1:
        raise ValueError(f"draws must be positive, got {draws}")
    if placement not in PLACEMENTS:
        raise ValueError(f"Unknown cache placement: {placement}")
    if not 0 <= L_u <= L_b:
        raise ValueError(f"cache size L_u={L_u} must lie in [0, L_b={L_b}]")

    rng = trial_rng(seed, 0, ORACLE_STREAM)
    request_l = rng.integers(0, L_b, size=draws)
    request_k = rng.integers(0, L_b, size=draws)
    same = request_l == request_k

    if placement == "independent":
        p = L_u / L_b
        uncached_l = rng.random(draws) >= p
        own_uncached_k = rng.random(draws) >= p
        other_uncached_k = np.where(same, own_uncached_k, rng.random(draws) >= p)
    else:
        if L_u != int(L_u):
            raise ValueError(f"fixed-size placement needs an integer L_u, got {L_u}")
        L_u = int(L_u)
        # A uniformly random L_u-subset is the prefix of a random permutation;
        # two distinct files occupy a uniformly random pair of distinct positions.
        uncached_l = rng.integers(0, L_b, size=draws) >= L_u
        first = rng.integers(0, L_b, size=draws)
        second = rng.integers(0, max(L_b - 1, 1), size=draws)
        second = second + (second >= first)
        own_uncached_k = first >= L_u
        other_uncached_k = np.where(same, own_uncached_k, second >= L_u)

    hits = uncached_l & own_uncached_k & other_uncached_k
    frequency = float(np.mean(hits))
    return frequency, math.sqrt(frequency * (1.0 - frequency) / draws)


def mc_offload_fraction(
    config: SystemConfig,
    draws: int,
    seed: Optional[int] = None,
    threads: int = 1,
    logger: Optional[logging.Logger] = None,
) -> Tuple[float, float]:
    """
    Monte Carlo estimate of E{K_bar}/K using the scenario generator.

    Returns:
        (mean active fraction, standard error)
    """
    logger = logger or logging.getLogger(__name__)
    if draws < 1:
        raise ValueError(f"draws must be positive, got {draws}")
    seed = config.seed if seed is None else seed

    def run_block(indices: range) -> np.ndarray:
        fractions = np.empty(len(indices))
        for row, t in enumerate(indices):
            cs = draw_cache_state(config, trial_rng(seed, t, SCENARIO_STREAM))
            fractions[row] = np.count_nonzero(np.diag(cs.c)) / config.K
        return fractions

    fractions = np.concatenate(
        map_ordered(run_block, blocks(draws, 256), threads=threads, logger=logger)
    )
    stderr = float(np.std(fractions, ddof=1) / np.sqrt(draws)) if draws > 1 else float("nan")
    logger.debug(f"Active fraction over {draws} draws: {np.mean(fractions):.6f}")
    return float(np.mean(fractions)), stderr


# ---------------------------------------------------------------------------
# Regularizer search
# ---------------------------------------------------------------------------


def optimize_xi(
    rate_function: Callable[[float], float],
    xi_range: Tuple[float, float] = XI_RANGE,
    coarse_probes: int = COARSE_PROBES,
    relative_width: float = XI_RELATIVE_WIDTH,
) -> Tuple[float, float]:
    """
    Maximize rate_function over xi.

    A log-spaced coarse grid locates the best bracket, golden-section search
    on log10(xi) narrows it to the requested relative width and a final
    parabolic step through the three best bracket points refines it. The
    best point evaluated anywhere is returned, so the result is never worse
    than any coarse probe.

    Raises:
        OptimizerDomainError: the rate is non-finite at some probed xi
    """
    lo, hi = math.log10(xi_range[0]), math.log10(xi_range[1])
    if not lo < hi:
        raise ValueError(f"empty regularizer range {xi_range}")
    evaluated: Dict[float, float] = {}

    def value(u: float) -> float:
        if u not in evaluated:
            rate = float(rate_function(10.0**u))
            if not math.isfinite(rate):
                raise OptimizerDomainError(f"rate is {rate} at xi={10.0**u:.6g}")
            evaluated[u] = rate
        return evaluated[u]

    grid = np.linspace(lo, hi, coarse_probes)
    rates = [value(float(u)) for u in grid]
    best = int(np.argmax(rates))
    a = float(grid[max(best - 1, 0)])
    b = float(grid[min(best + 1, len(grid) - 1)])

    tolerance = math.log10(1.0 + relative_width)
    c, d = b - _INV_PHI * (b - a), a + _INV_PHI * (b - a)
    fc, fd = value(c), value(d)
    while b - a > tolerance:
        if fc > fd:
            b, d, fd = d, c, fc
            c = b - _INV_PHI * (b - a)
            fc = value(c)
        else:
            a, c, fc = c, d, fd
            d = a + _INV_PHI * (b - a)
            fd = value(d)

    # parabola through a, the better interior point and b
    x0, x2 = a, b
    x1 = c if fc > fd else d
    f0, f1, f2 = value(x0), value(x1), value(x2)
    denominator = (x1 - x0) * (f1 - f2) - (x1 - x2) * (f1 - f0)
    if denominator != 0.0:
        vertex = x1 - 0.5 * (
            (x1 - x0) ** 2 * (f1 - f2) - (x1 - x2) ** 2 * (f1 - f0)
        ) / denominator
        if x0 < vertex < x2:
            value(vertex)

    u_star = max(evaluated, key=evaluated.get)
    return 10.0**u_star, evaluated[u_star]


# ---------------------------------------------------------------------------
# Sweeps
# ---------------------------------------------------------------------------


@dataclass
class SweepResult:
    """Rates of every (precoder, mode, method) series over one swept axis."""

    axis: str
    values: List[float]
    series: Dict[SeriesKey, List[float]]
    stderr: Dict[SeriesKey, List[float]] = field(default_factory=dict)
    reasons: Dict[SeriesKey, Dict[int, str]] = field(default_factory=dict)
    xi_star: Dict[str, List[float]] = field(default_factory=dict)
    trials: int = 0
    seed: int = 0
    metadata: Dict[str, Any] = field(default_factory=dict)

    def __post_init__(self):
        for key, rates in self.series.items():
            if len(rates) != len(self.values):
                raise ValueError(
                    f"series {key} has {len(rates)} values for {len(self.values)} axis points"
                )

    def rate(self, precoder: str, mode: str) -> np.ndarray:
        """Rates of the series for (precoder, mode), NaN where absent."""
        for (p, m, _), rates in self.series.items():
            if p == precoder and m == mode:
                return np.asarray(rates, dtype=float)
        raise KeyError(f"no series for precoder={precoder}, mode={mode}")

    def records(self) -> List[Dict[str, Any]]:
        """One row per (axis point, series) in axis order."""
        rows = []
        for index, axis_value in enumerate(self.values):
            for key, rates in self.series.items():
                precoder, mode, method = key
                rate = rates[index]
                stderr = self.stderr.get(key)
                rows.append(
                    {
                        "axis": self.axis,
                        "axis_value": axis_value,
                        "precoder": precoder,
                        "mode": mode,
                        "method": method,
                        "rate": None if math.isnan(rate) else rate,
                        "stderr": None if stderr is None or math.isnan(stderr[index]) else stderr[index],
                        "trials": self.trials if method == METHOD_MONTE_CARLO else 0,
                        "seed": self.seed,
                        "reason": self.reasons.get(key, {}).get(index),
                    }
                )
        return rows


def _reason(error: Exception) -> str:
    if isinstance(error, ZFInfeasibleError):
        return "zf-infeasible"
    if isinstance(error, NoActiveUsersError):
        return "no-active-users"
    if isinstance(error, InfeasibleScenarioError):
        return "infeasible"
    return "numerical"


def _method(precoder: str, evaluation: str) -> str:
    if evaluation == "monte-carlo":
        return METHOD_MONTE_CARLO
    return METHOD_ASYMPTOTIC if precoder == "rzf" else METHOD_BOUND


def closed_form_rate(
    precoder: str,
    mode: str,
    counts: ExpectedCounts,
    beta: float,
    E0: float,
    sigma2: float,
    xi_range: Tuple[float, float] = XI_RANGE,
) -> Tuple[float, Optional[float]]:
    """
    Per-user rate from the closed-form bounds (MRT, ZF) or the optimized
    large-system RZF expression at the given counts.

    Returns:
        (rate, xi_star), xi_star being None for MRT and ZF
    """
    K, M = counts.K, counts.M
    if mode == "proposed" and counts.K_bar <= 0:
        raise NoActiveUsersError("no active users: every request is served from cache")

    if precoder == "mrt":
        if mode == "baseline":
            return mrt_bound_baseline(beta, M, K, E0, sigma2), None
        return mrt_bound_uniform(beta, M, counts.N, counts.K_bar, E0, sigma2), None
    if precoder == "zf":
        if mode == "baseline":
            return zf_bound_baseline(beta, M, K, E0, sigma2), None
        return zf_bound_uniform(beta, M, counts.D, counts.K_bar, E0, sigma2), None
    if precoder == "rzf":
        if mode == "baseline":
            def objective(xi):
                return rzf_rate_baseline(M, beta, K, E0, sigma2, xi)
        else:
            def objective(xi):
                return rzf_rate_uniform(M, beta, counts.N, counts.D, counts.K_bar, E0, sigma2, xi)
        xi_star, rate = optimize_xi(objective, xi_range)
        return rate, xi_star
    raise ValueError(f"Unknown precoder kind: {precoder}")


def _evaluate_point(
    template: SystemConfig,
    rho0: float,
    L_u: float,
    index: int,
    precoders: Sequence[str],
    modes: Sequence[str],
    evaluation: str,
    trials: int,
    seed: int,
    large_K: float,
    finite_K: int,
    xi_range: Tuple[float, float],
    logger: logging.Logger,
) -> Dict[SeriesKey, Tuple[float, float, Optional[str], Optional[float]]]:
    """(rate, stderr, reason, xi_star) of every series at one grid point."""
    beta, E0, sigma2 = template.common_beta, template.E0, template.sigma2
    stats = caching_statistics(template.L_b, L_u)
    K = large_K if evaluation == "large-system" else finite_K
    counts = expected_counts(stats, rho0, K, rounding=evaluation != "large-system")

    out = {}
    for mode in modes:
        for precoder in precoders:
            key = (precoder, mode, _method(precoder, evaluation))
            try:
                if evaluation == "monte-carlo":
                    xi_star = None
                    if precoder == "rzf":
                        # the regularizer comes from the large-system optimum
                        large = expected_counts(stats, rho0, large_K)
                        _, xi_star = closed_form_rate(
                            precoder, mode, large, beta, E0, sigma2, xi_range
                        )
                    rate, stderr = _monte_carlo_rate(
                        template, precoder, mode, counts, L_u, xi_star, trials,
                        point_seed(seed, index),
                    )
                else:
                    rate, xi_star = closed_form_rate(
                        precoder, mode, counts, beta, E0, sigma2, xi_range
                    )
                    stderr = float("nan")
                out[key] = (rate, stderr, None, xi_star)
            except (InfeasibleScenarioError, NumericalError) as e:
                logger.debug(f"Point {index} ({precoder}/{mode}) absent: {e}")
                out[key] = (float("nan"), float("nan"), _reason(e), None)
    return out


def _monte_carlo_rate(
    template: SystemConfig,
    precoder: str,
    mode: str,
    counts: ExpectedCounts,
    L_u: float,
    xi_star: Optional[float],
    trials: int,
    seed: int,
) -> Tuple[float, float]:
    if L_u != int(L_u):
        raise ConfigError(f"Monte Carlo sweeps need an integer cache size, got {L_u}")
    fields = template.model_dump()
    fields.update(
        M=int(counts.M),
        K=int(counts.K),
        L_u=int(L_u),
        beta=template.common_beta,
        precoder=precoder,
        mode=mode,
        seed=seed,
    )
    if xi_star is not None:
        fields["xi"] = xi_star
    config = SystemConfig(**fields)
    report = mc_ergodic_rate(config, cache_state_policy="redraw", trials=trials)
    return report.mean_rate, report.mean_stderr


def _sweep(
    axis: str,
    values: Sequence[float],
    points: Sequence[Tuple[float, float]],
    template: SystemConfig,
    precoders: Sequence[str],
    modes: Sequence[str],
    evaluation: str,
    trials: int,
    threads: int,
    large_K: float,
    finite_K: int,
    xi_range: Tuple[float, float],
    logger: Optional[logging.Logger],
) -> SweepResult:
    logger = logger or logging.getLogger(__name__)
    if evaluation not in EVALUATIONS:
        raise ConfigError(f"Unknown sweep evaluation: {evaluation}")
    for precoder in precoders:
        if precoder not in PRECODERS:
            raise ConfigError(f"Unknown precoder kind: {precoder}")
    for mode in modes:
        if mode not in MODES:
            raise ConfigError(f"Unknown mode: {mode}")

    seed = template.seed
    logger.info(
        f"Sweeping {axis} over {len(points)} points ({evaluation}, "
        f"precoders={','.join(precoders)}, modes={','.join(modes)})"
    )
    started = time.perf_counter()

    def run_point(index: int):
        rho0, L_u = points[index]
        return _evaluate_point(
            template, rho0, L_u, index, precoders, modes, evaluation, trials, seed,
            large_K, finite_K, xi_range, logger,
        )

    results = map_ordered(run_point, range(len(points)), threads=threads, logger=logger)

    keys = list(results[0].keys()) if results else []
    series = {key: [r[key][0] for r in results] for key in keys}
    stderr = {}
    if evaluation == "monte-carlo":
        stderr = {key: [r[key][1] for r in results] for key in keys}
    reasons = {}
    for key in keys:
        absent = {i: r[key][2] for i, r in enumerate(results) if r[key][2] is not None}
        if absent:
            reasons[key] = absent
            logger.warning(f"Series {'/'.join(key)}: {len(absent)} absent points")
    xi_star = {}
    for key in keys:
        if key[0] == "rzf":
            xi_star[key[1]] = [
                float("nan") if r[key][3] is None else r[key][3] for r in results
            ]

    logger.info(f"Sweep finished in {time.perf_counter() - started:.2f}s")
    return SweepResult(
        axis=axis,
        values=[float(v) for v in values],
        series=series,
        stderr=stderr,
        reasons=reasons,
        xi_star=xi_star,
        trials=trials if evaluation == "monte-carlo" else 0,
        seed=seed,
        metadata={
            "config": template.model_dump(mode="json"),
            "evaluation": evaluation,
            "K": large_K if evaluation == "large-system" else finite_K,
            "rounding": "none" if evaluation == "large-system" else "nearest, halves up",
            "xi_range": list(xi_range),
            "timestamp": datetime.now(timezone.utc).isoformat(),
        },
    )


def sweep_rho0(
    template: SystemConfig,
    rho0_grid: Sequence[float] = DEFAULT_RHO0_GRID,
    precoders: Sequence[str] = PRECODERS,
    modes: Sequence[str] = MODES,
    evaluation: str = "large-system",
    trials: int = 1000,
    threads: int = 1,
    large_K: float = LARGE_SYSTEM_K,
    finite_K: int = FINITE_K,
    xi_range: Tuple[float, float] = XI_RANGE,
    logger: Optional[logging.Logger] = None,
) -> SweepResult:
    """Per-user rate versus antennas per user rho0 = M/K at the template's cache size."""
    points = [(float(rho0), template.L_u) for rho0 in rho0_grid]
    return _sweep(
        "rho0", rho0_grid, points, template, precoders, modes, evaluation, trials,
        threads, large_K, finite_K, xi_range, logger,
    )


def sweep_cache_size(
    template: SystemConfig,
    L_u_grid: Sequence[float] = DEFAULT_L_U_GRID,
    precoders: Sequence[str] = PRECODERS,
    modes: Sequence[str] = MODES,
    rho0: float = DEFAULT_CACHE_SWEEP_RHO0,
    evaluation: str = "large-system",
    trials: int = 1000,
    threads: int = 1,
    large_K: float = LARGE_SYSTEM_K,
    finite_K: int = FINITE_K,
    xi_range: Tuple[float, float] = XI_RANGE,
    logger: Optional[logging.Logger] = None,
) -> SweepResult:
    """Per-user rate versus cache size L_u at fixed rho0."""
    for L_u in L_u_grid:
        if not 0 <= L_u <= template.L_b:
            raise ConfigError(f"cache size L_u={L_u} must lie in [0, L_b={template.L_b}]")
    points = [(float(rho0), float(L_u)) for L_u in L_u_grid]
    result = _sweep(
        "L_u", L_u_grid, points, template, precoders, modes, evaluation, trials,
        threads, large_K, finite_K, xi_range, logger,
    )
    result.metadata["rho0"] = rho0
    return result

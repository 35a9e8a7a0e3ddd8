"""
Rate service: instantaneous SINR, Monte Carlo ergodic rates and the
closed-form ergodic-rate lower bounds for MRT and ZF precoding.
"""

import logging
import time
from dataclasses import dataclass, field
from typing import Dict, Iterable, Optional, Tuple

import numpy as np

from services.channel import complex_gaussian, draw_channel, dump_realization
from services.errors import (
    ExpectationDivergesError,
    NoActiveUsersError,
    ZFInfeasibleError,
)
from services.precoding import compute_precoders, zf_solution
from services.scenario import (
    CacheState,
    DerivedSets,
    PowerAllocation,
    SystemConfig,
    derive_sets,
    draw_cache_state,
    uniform_power,
)
from services.streams import CHANNEL_STREAM, SCENARIO_STREAM, blocks, map_ordered, trial_rng

logger = logging.getLogger(__name__)

METHOD_MONTE_CARLO = "monte-carlo"
METHOD_BOUND = "bound"
METHOD_ASYMPTOTIC = "asymptotic"
METHODS = (METHOD_MONTE_CARLO, METHOD_BOUND, METHOD_ASYMPTOTIC)

CACHE_POLICIES = ("fixed", "redraw")
TRIAL_BLOCK = 64


@dataclass
class RateReport:
    """Per-user and mean ergodic rates (bits/s/Hz) with their provenance."""

    per_user_rate: Dict[int, float]
    mean_rate: float
    method: str
    stderr: Optional[Dict[int, float]] = None
    mean_stderr: Optional[float] = None
    trials: int = 0
    sum_rate: float = 0.0
    inactive_users: float = 0.0
    infeasible_trials: int = 0
    empty_trials: int = 0
    notes: Dict[str, str] = field(default_factory=dict)

    def __post_init__(self):
        if self.method not in METHODS:
            raise ValueError(f"Unknown rate method: {self.method}")
        if (self.stderr is not None) != (self.method == METHOD_MONTE_CARLO):
            raise ValueError("stderr must be present exactly for Monte Carlo reports")
        if any(rate < 0 for rate in self.per_user_rate.values()) or self.mean_rate < 0:
            raise ValueError("rates must be nonnegative")


# ---------------------------------------------------------------------------
# Instantaneous quantities
# ---------------------------------------------------------------------------


def sinr(
    k: int,
    H: np.ndarray,
    W: np.ndarray,
    E: PowerAllocation,
    U_k: Iterable[int],
    sigma2: float,
) -> float:
    """
    SINR of user k after cache-enabled interference cancellation.

    Only users in U_k interfere; W holds one precoding vector per row.
    """
    W = getattr(W, "W", W)
    powers = getattr(E, "E", E)
    h_k = H[k]
    signal = abs(np.vdot(h_k, W[k])) ** 2 * powers[k]
    interference = sum(abs(np.vdot(h_k, W[l])) ** 2 * powers[l] for l in U_k)
    return float(signal / (interference + sigma2))


def sinr_all(
    H: np.ndarray, W: np.ndarray, E: PowerAllocation, sets: DerivedSets, sigma2: float
) -> np.ndarray:
    """SINR of every user at once (NaN for inactive users)."""
    W = getattr(W, "W", W)
    powers = getattr(E, "E", E)
    # gains[k, l] = |h_k^H w_l|^2
    gains = np.abs(H.conj() @ W.T) ** 2
    signal = np.diag(gains) * powers
    interference = np.sum(gains * powers[None, :] * sets.interference_mask, axis=1)

    out = np.full(H.shape[0], np.nan)
    out[sets.active] = signal[sets.active] / (interference[sets.active] + sigma2)
    return out


def mrt_rate_mc(
    k: int, H: np.ndarray, U_k: Iterable[int], E: PowerAllocation, sigma2: float
) -> float:
    """Single-realization MRT rate written directly in terms of the channels."""
    powers = getattr(E, "E", E)
    h_k = H[k]
    signal = np.vdot(h_k, h_k).real * powers[k]
    interference = sum(
        abs(np.vdot(h_k, H[l])) ** 2 / np.vdot(H[l], H[l]).real * powers[l] for l in U_k
    )
    return float(np.log2(1.0 + signal / (interference + sigma2)))


def zf_rate_mc(k: int, Q_k: np.ndarray, E_k: float, sigma2: float) -> float:
    """Single-realization ZF rate: log2(1 + E_k / (||Q (Q^H Q)^{-1} e_1||^2 sigma^2))."""
    v = zf_solution(Q_k)
    return float(np.log2(1.0 + E_k / (np.vdot(v, v).real * sigma2)))


def jensen_bound_estimate(sinr_samples: np.ndarray) -> float:
    """Monte Carlo estimate of the Jensen bound log2(1 + 1/E{1/SINR})."""
    samples = np.asarray(sinr_samples, dtype=float)
    return float(np.log2(1.0 + 1.0 / np.mean(1.0 / samples)))


# ---------------------------------------------------------------------------
# Closed-form lower bounds
# ---------------------------------------------------------------------------


def mrt_bound(
    beta_k: float, M: float, E_k: float, interferer_powers: Iterable[float], sigma2: float
) -> float:
    """MRT ergodic-rate lower bound for arbitrary power allocation."""
    interference = beta_k * float(sum(interferer_powers))
    return float(np.log2(1.0 + beta_k * (M - 1) * E_k / (interference + sigma2)))


def mrt_bound_uniform(
    beta_k: float, M: float, N_k: float, K_bar: float, E0: float, sigma2: float
) -> float:
    """MRT bound with E_k = E0 / K_bar for every active user."""
    if K_bar <= 0:
        raise NoActiveUsersError(f"uniform allocation needs K_bar >= 1, got {K_bar}")
    return float(
        np.log2(1.0 + beta_k * (M - 1) * E0 / (beta_k * N_k * E0 + K_bar * sigma2))
    )


def mrt_bound_baseline(beta_k: float, M: float, K: float, E0: float, sigma2: float) -> float:
    """MRT bound of conventional massive MIMO (no caching)."""
    return mrt_bound_uniform(beta_k, M, K - 1, K, E0, sigma2)


def zf_bound(beta_k: float, M: float, D_k: float, E_k: float, sigma2: float) -> float:
    """ZF ergodic-rate lower bound with D_k precoding constraints."""
    if M < D_k + 1:
        raise ZFInfeasibleError(f"ZF infeasible: M={M} < D_k + 1 = {D_k + 1}")
    return float(np.log2(1.0 + beta_k * (M - D_k - 1) * E_k / sigma2))


def zf_bound_uniform(
    beta_k: float, M: float, D_k: float, K_bar: float, E0: float, sigma2: float
) -> float:
    """ZF bound with E_k = E0 / K_bar."""
    if K_bar <= 0:
        raise NoActiveUsersError(f"uniform allocation needs K_bar >= 1, got {K_bar}")
    return zf_bound(beta_k, M, D_k, E0 / K_bar, sigma2)


def zf_bound_baseline(beta_k: float, M: float, K: float, E0: float, sigma2: float) -> float:
    """ZF bound of conventional massive MIMO: log2(1 + beta (M - K) E0 / (K sigma^2))."""
    if M < K:
        raise ZFInfeasibleError(f"ZF infeasible: M={M} < K={K}")
    return float(np.log2(1.0 + beta_k * (M - K) * E0 / (K * sigma2)))


def zf_gain_expectation(M: int, D: int, beta: float) -> float:
    """Closed form of E{||Q (Q^H Q)^{-1} e_1||^2} = 1 / ((M - D - 1) beta)."""
    if M - D - 1 <= 0:
        raise ExpectationDivergesError(f"E{{||Q(Q^H Q)^-1 e1||^2}} diverges for M={M}, D={D}")
    return 1.0 / ((M - D - 1) * beta)


def zf_gain_oracle(
    M: int, D: int, beta: float, trials: int, rng: Optional[np.random.Generator] = None
) -> Tuple[float, float]:
    """
    Monte Carlo estimate of E{||Q (Q^H Q)^{-1} e_1||^2} for i.i.d. Q = sqrt(beta) G.

    Returns:
        (estimate, standard error)
    """
    rng = rng or np.random.default_rng()
    Q = np.sqrt(beta) * complex_gaussian(rng, (trials, M, D + 1))
    gram = np.conj(np.swapaxes(Q, 1, 2)) @ Q
    e1 = np.zeros((trials, D + 1, 1), dtype=complex)
    e1[:, 0, 0] = 1.0
    v = Q @ np.linalg.solve(gram, e1)
    samples = np.sum(np.abs(v[:, :, 0]) ** 2, axis=1)
    stderr = float(np.std(samples, ddof=1) / np.sqrt(trials)) if trials > 1 else float("nan")
    return float(np.mean(samples)), stderr


def bound_report(
    config: SystemConfig, cache_state: CacheState, precoder_kind: str
) -> RateReport:
    """Closed-form per-user lower bounds (MRT or ZF) for a fixed cache state."""
    sets = derive_sets(cache_state)
    power = uniform_power(sets, config)
    betas = config.beta_vector

    per_user = {}
    for k in sets.active:
        k = int(k)
        if precoder_kind == "mrt":
            per_user[k] = mrt_bound(
                betas[k], config.M, power.E[k], power.E[sets.U[k]], config.sigma2
            )
        elif precoder_kind == "zf":
            per_user[k] = zf_bound(betas[k], config.M, sets.D[k], power.E[k], config.sigma2)
        else:
            raise ValueError(f"No closed-form bound for precoder '{precoder_kind}'")

    values = np.array(list(per_user.values()))
    return RateReport(
        per_user_rate=per_user,
        mean_rate=float(np.mean(values)),
        method=METHOD_BOUND,
        sum_rate=float(np.sum(values)),
        inactive_users=float(config.K - sets.K_bar),
    )


# ---------------------------------------------------------------------------
# Monte Carlo ergodic rate
# ---------------------------------------------------------------------------


def fixed_cache_state(config: SystemConfig) -> CacheState:
    """The cache state the fixed policy simulates: drawn from the seed, or all-empty for baseline."""
    return draw_cache_state(config, trial_rng(config.seed, 0, SCENARIO_STREAM))


def _fixed_scenario(config: SystemConfig, cache_state: Optional[CacheState]):
    if cache_state is None:
        cache_state = fixed_cache_state(config)
    sets = derive_sets(cache_state)
    return sets, uniform_power(sets, config)


def mc_ergodic_rate(
    config: SystemConfig,
    cache_state_policy: str = "fixed",
    precoder_kind: Optional[str] = None,
    trials: int = 1000,
    cache_state: Optional[CacheState] = None,
    threads: int = 1,
    alpha: Optional[float] = None,
    dump_channel: Optional[str] = None,
    logger: Optional[logging.Logger] = None,
) -> RateReport:
    """
    Monte Carlo ergodic rate per active user.

    Args:
        config: scenario; config.mode selects proposed or baseline sets
        cache_state_policy: "fixed" averages over channels for one cache state,
            "redraw" also redraws caches and requests in every trial
        precoder_kind: "mrt", "zf" or "rzf" (defaults to config.precoder)
        trials: number of i.i.d. channel draws
        cache_state: cache state for the fixed policy (drawn from the seed if omitted)
        threads: worker threads; results do not depend on this value
        alpha: RZF regularizer (defaults to config.xi * M)
        dump_channel: optional path receiving the first trial's H

    Returns:
        RateReport with per-user sample means and standard errors
    """
    logger = logger or logging.getLogger(__name__)
    if trials < 1:
        raise ValueError(f"trials must be positive, got {trials}")
    if cache_state_policy not in CACHE_POLICIES:
        raise ValueError(f"Unknown cache state policy: {cache_state_policy}")

    kind = precoder_kind or config.precoder
    alpha = config.alpha if alpha is None else alpha
    fixed = None
    if cache_state_policy == "fixed":
        fixed = _fixed_scenario(config, cache_state)

    logger.info(
        f"Monte Carlo {kind}/{config.mode} rate: M={config.M}, K={config.K}, "
        f"{trials} trials, policy={cache_state_policy}, threads={threads}"
    )
    started = time.perf_counter()

    def run_block(indices: range):
        rates = np.full((len(indices), config.K), np.nan)
        status = np.zeros(len(indices), dtype=np.int8)  # 1 infeasible, 2 empty
        for row, t in enumerate(indices):
            if fixed is None:
                try:
                    cs = draw_cache_state(config, trial_rng(config.seed, t, SCENARIO_STREAM))
                    sets = derive_sets(cs)
                    power = uniform_power(sets, config)
                except NoActiveUsersError:
                    status[row] = 2
                    continue
            else:
                sets, power = fixed

            channel = draw_channel(config, trial_rng(config.seed, t, CHANNEL_STREAM))
            if t == 0 and dump_channel:
                dump_realization(channel, dump_channel)
            try:
                precoder = compute_precoders(kind, channel, sets, alpha=alpha)
            except ZFInfeasibleError as e:
                logger.debug(f"Trial {t}: {e}")
                status[row] = 1
                continue
            rates[row] = np.log2(1.0 + sinr_all(channel.H, precoder, power, sets, config.sigma2))
        return rates, status

    parts = map_ordered(run_block, blocks(trials, TRIAL_BLOCK), threads=threads, logger=logger)
    rates = np.concatenate([part[0] for part in parts], axis=0)
    status = np.concatenate([part[1] for part in parts])

    infeasible = int(np.sum(status == 1))
    empty = int(np.sum(status == 2))
    if infeasible:
        logger.warning(f"{infeasible} of {trials} trials were ZF-infeasible and are excluded")
    if empty:
        logger.warning(f"{empty} of {trials} trials had no active users and are excluded")

    valid = status == 0
    if not np.any(valid):
        if infeasible:
            raise ZFInfeasibleError(f"all {trials} trials were ZF-infeasible")
        raise NoActiveUsersError(f"all {trials} trials had no active users")

    report = summarize_trials(rates[valid], trials)
    report.infeasible_trials = infeasible
    report.empty_trials = empty
    report.inactive_users = float(np.mean(np.sum(np.isnan(rates[valid]), axis=1)))
    logger.info(
        f"Monte Carlo mean rate {report.mean_rate:.6f} bits/s/Hz "
        f"(stderr {report.mean_stderr:.2e}) in {time.perf_counter() - started:.2f}s"
    )
    return report


def summarize_trials(rates: np.ndarray, trials: int) -> RateReport:
    """Reduce a (trials x K) array of per-user rates (NaN = inactive)."""
    counts = np.sum(~np.isnan(rates), axis=0)
    per_user, stderr = {}, {}
    for k in np.flatnonzero(counts):
        column = rates[:, k][~np.isnan(rates[:, k])]
        per_user[int(k)] = float(np.mean(column))
        stderr[int(k)] = (
            float(np.std(column, ddof=1) / np.sqrt(column.size)) if column.size > 1 else float("nan")
        )

    trial_means = np.array([np.mean(row[~np.isnan(row)]) for row in rates])
    trial_sums = np.array([np.sum(row[~np.isnan(row)]) for row in rates])
    mean_stderr = (
        float(np.std(trial_means, ddof=1) / np.sqrt(trial_means.size))
        if trial_means.size > 1
        else float("nan")
    )
    return RateReport(
        per_user_rate=per_user,
        mean_rate=float(np.mean(trial_means)),
        method=METHOD_MONTE_CARLO,
        stderr=stderr,
        mean_stderr=mean_stderr,
        trials=trials,
        sum_rate=float(np.mean(trial_sums)),
    )


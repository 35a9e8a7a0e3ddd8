"""
Large-system RZF analysis.

G(rho, xi) is the resolvent integral of the Marchenko-Pastur law
F_rho = (1 - rho)^+ delta(mu) + sqrt((b - mu)(mu - a)) / (2 pi mu) on [a, b],
a, b = (1 -+ sqrt(rho))^2. It drives the deterministic signal and
interference powers of the RZF precoder.
"""

import logging
import math
from dataclasses import dataclass
from typing import Iterable, Optional, Tuple

import numpy as np
from scipy.special import roots_legendre

from services.channel import complex_gaussian
from services.errors import InvalidRegularizerError
from services.precoding import rzf
from services.rates import METHOD_ASYMPTOTIC, RateReport, summarize_trials, sinr_all
from services.scenario import (
    CacheState,
    DerivedSets,
    PowerAllocation,
    SystemConfig,
    derive_sets,
    uniform_power,
)
from services.streams import CHANNEL_STREAM, blocks, map_ordered, trial_rng

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class AsymptoticParams:
    """Load ratio rho = D/M and normalized regularizer xi = alpha/M."""

    rho: float
    xi: float

    def __post_init__(self):
        _check_xi(self.xi)
        if self.rho < 0:
            raise ValueError(f"load ratio rho must be nonnegative, got {self.rho}")

    @property
    def G(self) -> float:
        return g_closed(self.rho, self.xi)

    @property
    def dG(self) -> float:
        return g_derivative(self.rho, self.xi)

    def signal_power(self, M: float, beta_k: float, E_k: float) -> float:
        """Deterministic received signal power -M beta G^2 E_k / (dG/dxi)."""
        G = self.G
        return -M * beta_k * G * G * E_k / self.dG

    def interference_power(self, beta_k: float, E_l: float) -> float:
        """Interference power of a user with these parameters: beta_k E_l / (1 + G)^2."""
        return beta_k * E_l / (1.0 + self.G) ** 2


def _check_xi(xi: float) -> None:
    if not xi > 0:
        raise InvalidRegularizerError(f"invalid regularizer: xi={xi} must be positive")


def g_closed(rho: float, xi: float) -> float:
    """Closed-form G(rho, xi); the positive root of xi G^2 + (xi - 1 + rho) G - 1 = 0."""
    _check_xi(xi)
    a = (1.0 - rho) / xi
    root = math.sqrt(a * a + 2.0 * (1.0 + rho) / xi + 1.0)
    if a >= 1.0:
        return 0.5 * (root + a - 1.0)
    # root + a cancels when (1 - rho)/xi is large and negative; use the product of roots.
    return 2.0 / (xi * (root - a + 1.0))


def g_derivative(rho: float, xi: float) -> float:
    """dG/dxi from implicit differentiation of the defining quadratic."""
    G = g_closed(rho, xi)
    return -(G * G + G) / (2.0 * xi * G + xi - 1.0 + rho)


def _mp_nodes(rho: float, quadrature_points: int) -> Tuple[np.ndarray, np.ndarray]:
    """Eigenvalue nodes and weights of the continuous MP part (mu = c + r sin(theta))."""
    theta, weights = roots_legendre(quadrature_points)
    theta = 0.5 * math.pi * theta
    weights = 0.5 * math.pi * weights
    radius = 2.0 * math.sqrt(rho)
    lower, upper = (1.0 - math.sqrt(rho)) ** 2, (1.0 + math.sqrt(rho)) ** 2
    s, c2 = np.sin(theta), np.cos(theta) ** 2
    # mu = center + radius sin(theta), measured from the nearer support edge
    # so that mu stays accurate where it approaches zero (rho = 1).
    mu = np.where(s < 0, lower + radius * c2 / (1.0 - s), upper - radius * c2 / (1.0 + s))
    # density * dmu = r^2 cos^2(theta) / (2 pi mu) dtheta
    return mu, weights * radius**2 * c2 / (2.0 * math.pi)


def g_integral_oracle(rho: float, xi: float, quadrature_points: int = 10_000) -> float:
    """G(rho, xi) by Gauss-Legendre quadrature of the Marchenko-Pastur law (test fixture)."""
    _check_xi(xi)
    atom = max(1.0 - rho, 0.0) / xi
    if rho == 0:
        return atom
    mu, weights = _mp_nodes(rho, quadrature_points)
    return float(atom + np.sum(weights / (mu * (mu + xi))))


def g_derivative_integral_oracle(rho: float, xi: float, quadrature_points: int = 10_000) -> float:
    """dG/dxi = -int (mu + xi)^{-2} dF_rho(mu) by quadrature."""
    _check_xi(xi)
    atom = -max(1.0 - rho, 0.0) / xi**2
    if rho == 0:
        return atom
    mu, weights = _mp_nodes(rho, quadrature_points)
    return float(atom - np.sum(weights / (mu * (mu + xi) ** 2)))


def rzf_signal_power(M: float, beta_k: float, E_k: float, rho_k: float, xi_k: float) -> float:
    """Deterministic RZF signal power of user k."""
    return AsymptoticParams(rho_k, xi_k).signal_power(M, beta_k, E_k)


def rzf_interference_power(beta_k: float, E_l: float, rho_l: float, xi_l: float) -> float:
    """Deterministic interference power of user l at user k."""
    return AsymptoticParams(rho_l, xi_l).interference_power(beta_k, E_l)


def rzf_rate(
    M: float,
    beta: float,
    E_k: float,
    interferers: Iterable[Tuple[float, float, float]],
    rho_k: float,
    xi_k: float,
    sigma2: float,
) -> float:
    """
    Large-system RZF rate of user k.

    Args:
        interferers: (E_l, rho_l, xi_l) for every l in U_k
    """
    signal = rzf_signal_power(M, beta, E_k, rho_k, xi_k)
    interference = sum(
        rzf_interference_power(beta, E_l, rho_l, xi_l) for E_l, rho_l, xi_l in interferers
    )
    return float(np.log2(1.0 + signal / (interference + sigma2)))


def rzf_rate_uniform(
    M: float, beta: float, N_k: float, D_k: float, K_bar: float, E0: float, sigma2: float, xi: float
) -> float:
    """
    RZF rate with uniform power and one common load ratio rho = D_k / M.

    N_k and D_k may be real-valued expected counts.
    """
    rho = D_k / M
    E = E0 / K_bar
    signal = rzf_signal_power(M, beta, E, rho, xi)
    interference = N_k * rzf_interference_power(beta, E, rho, xi)
    return float(np.log2(1.0 + signal / (interference + sigma2)))


def rzf_rate_baseline(M: float, beta: float, K: float, E0: float, sigma2: float, xi: float) -> float:
    """RZF rate of conventional massive MIMO: rho = (K - 1)/M, K_bar = K."""
    return rzf_rate_uniform(M, beta, K - 1, K - 1, K, E0, sigma2, xi)


def rzf_rate_for_state(
    config: SystemConfig,
    sets: DerivedSets,
    power: PowerAllocation,
    k: int,
    xi: Optional[float] = None,
) -> float:
    """Large-system RZF rate of user k for a concrete cache state, rho_l = D_l / M."""
    xi = config.xi if xi is None else xi
    beta = config.common_beta
    interferers = [(power.E[l], sets.D[int(l)] / config.M, xi) for l in sets.U[k]]
    return rzf_rate(
        config.M, beta, power.E[k], interferers, sets.D[k] / config.M, xi, config.sigma2
    )


def asymptotic_report(
    config: SystemConfig, cache_state: CacheState, xi: Optional[float] = None
) -> RateReport:
    """Large-system RZF rates of every active user of a fixed cache state."""
    sets = derive_sets(cache_state)
    power = uniform_power(sets, config)
    per_user = {int(k): rzf_rate_for_state(config, sets, power, int(k), xi) for k in sets.active}
    values = np.array(list(per_user.values()))
    return RateReport(
        per_user_rate=per_user,
        mean_rate=float(np.mean(values)),
        method=METHOD_ASYMPTOTIC,
        sum_rate=float(np.sum(values)),
        inactive_users=float(config.K - sets.K_bar),
    )


def finite_system_rzf_rate(
    M: int,
    beta: float,
    E_k: float,
    E_l: float,
    rho: float,
    xi: float,
    n_interferers: int,
    sigma2: float,
    trials: int,
    seed: int = 0,
    threads: int = 1,
    logger: Optional[logging.Logger] = None,
) -> RateReport:
    """
    Monte Carlo RZF rate of one user at finite M with a prescribed load.

    User 0 is protected against D = round(rho M) users and is interfered by
    n_interferers users, each of which in turn protects user 0 plus D - 1
    others. Precoders are the finite-M RZF vectors with alpha = xi M, so the
    result converges to rzf_rate() with the same (rho, xi) as M grows.
    """
    logger = logger or logging.getLogger(__name__)
    _check_xi(xi)
    D = int(round(rho * M))
    if D < 1:
        raise ValueError(f"rho * M must be at least 1, got {rho * M}")
    pool = 1 + n_interferers + D
    interferers = np.arange(1, n_interferers + 1)
    alpha = xi * M

    logger.info(
        f"Finite-system RZF: M={M}, D={D}, {n_interferers} interferers, {trials} trials"
    )

    def run_block(indices: range):
        rates = np.full((len(indices), pool), np.nan)
        for row, t in enumerate(indices):
            rng = trial_rng(seed, t, CHANNEL_STREAM)
            others = np.arange(1, pool)
            interference_mask = np.zeros((pool, pool), dtype=bool)
            interference_mask[0, interferers] = True
            Lambda = {0: np.sort(rng.choice(others, size=D, replace=False))}
            for l in interferers:
                candidates = others[others != l]
                Lambda[int(l)] = np.concatenate(
                    ([0], np.sort(rng.choice(candidates, size=D - 1, replace=False)))
                )

            G = complex_gaussian(rng, (pool, M))
            W = np.zeros((pool, M), dtype=complex)
            for user, constraint in Lambda.items():
                W[user] = rzf(user, G, constraint, alpha)

            E = np.zeros(pool)
            E[0], E[interferers] = E_k, E_l
            sets = DerivedSets(
                active=np.array([0]),
                K_bar=1,
                U={0: interferers},
                Lambda={0: Lambda[0]},
                N={0: n_interferers},
                D={0: D},
                interference_mask=interference_mask,
                constraint_mask=np.zeros((pool, pool), dtype=bool),
            )
            rates[row] = np.log2(1.0 + sinr_all(np.sqrt(beta) * G, W, E, sets, sigma2))
        return rates

    parts = map_ordered(run_block, blocks(trials, 8), threads=threads, logger=logger)
    return summarize_trials(np.concatenate(parts, axis=0), trials)

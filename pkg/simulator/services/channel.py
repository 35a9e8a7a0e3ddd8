"""
Channel service: i.i.d. Rayleigh fading realizations and the statistical
oracles used to check the MRT analysis.
"""

import logging
from dataclasses import dataclass
from typing import Optional, Sequence, Tuple, Union

import numpy as np

from services.errors import ExpectationDivergesError
from services.scenario import SystemConfig

logger = logging.getLogger(__name__)


@dataclass(frozen=True, eq=False)
class ChannelRealization:
    """One fading draw: G holds the unit-variance fading, H = sqrt(beta_k) * G row-wise."""

    G: np.ndarray  # K x M
    H: np.ndarray  # K x M

    @property
    def K(self) -> int:
        return int(self.H.shape[0])

    @property
    def M(self) -> int:
        return int(self.H.shape[1])


def complex_gaussian(rng: np.random.Generator, shape) -> np.ndarray:
    """CN(0, 1) samples: independent real and imaginary parts of variance 1/2."""
    return (rng.standard_normal(shape) + 1j * rng.standard_normal(shape)) / np.sqrt(2.0)


def draw_channel(
    config: SystemConfig,
    rng: np.random.Generator,
    beta: Optional[Union[float, Sequence[float]]] = None,
) -> ChannelRealization:
    """
    Draw one K x M channel realization.

    Args:
        config: scenario configuration (M, K and the default beta)
        rng: random generator of this trial
        beta: optional override of the large-scale coefficients (tests only)
    """
    G = complex_gaussian(rng, (config.K, config.M))
    betas = config.beta_vector if beta is None else np.broadcast_to(
        np.asarray(beta, dtype=float), (config.K,)
    )
    H = np.sqrt(betas)[:, None] * G
    return ChannelRealization(G=G, H=H)


def dump_realization(realization: ChannelRealization, path: str) -> None:
    """Write H as row-major little-endian complex64 pairs (debugging aid)."""
    np.ascontiguousarray(realization.H, dtype="<c8").tofile(path)
    logger.info(
        f"Dumped {realization.K}x{realization.M} channel realization to {path}"
    )


def inv_norm_expectation_oracle(
    M: int, beta: float, trials: int, rng: Optional[np.random.Generator] = None
) -> Tuple[float, float]:
    """
    Monte Carlo estimate of E{1/||h_k||^2} for h_k = sqrt(beta) * g_k, g_k ~ CN(0, I_M).

    The closed form is 1 / (beta * (M - 1)); with M = 1 the inverse
    chi-square variable has no mean.

    Returns:
        (estimate, standard error)
    """
    if M < 2:
        raise ExpectationDivergesError(
            f"E{{1/||h||^2}} diverges for M={M}: inverse chi-square with 2 degrees of freedom"
        )
    if trials < 1:
        raise ValueError(f"trials must be positive, got {trials}")

    rng = rng or np.random.default_rng()
    g = complex_gaussian(rng, (trials, M))
    samples = 1.0 / (beta * np.sum(np.abs(g) ** 2, axis=1))

    stderr = float(np.std(samples, ddof=1) / np.sqrt(trials)) if trials > 1 else float("nan")
    return float(np.mean(samples)), stderr


def inv_norm_expectation(M: int, beta: float) -> float:
    """Closed form of E{1/||h_k||^2}."""
    if M < 2:
        raise ExpectationDivergesError(f"E{{1/||h||^2}} diverges for M={M}")
    return 1.0 / (beta * (M - 1))

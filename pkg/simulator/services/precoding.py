"""
Precoding service: cache-aware MRT, ZF and RZF unit-norm precoding vectors.

Conventions: H and G hold one user per row (h_k, g_k as 1-D arrays), the
received signal of user k through precoder w is h_k^H w = np.vdot(h_k, w).
"""

import logging
from dataclasses import dataclass
from typing import Literal, Optional, Sequence

import numpy as np
from scipy.linalg import LinAlgError, cho_factor, cho_solve

from services.channel import ChannelRealization
from services.errors import (
    DegenerateChannelError,
    InvalidRegularizerError,
    ZFInfeasibleError,
)
from services.scenario import DerivedSets

logger = logging.getLogger(__name__)

PrecoderKind = Literal["mrt", "zf", "rzf"]
PRECODER_KINDS = ("mrt", "zf", "rzf")

# Reciprocal condition number of Q^H Q below which ZF is declared infeasible.
RCOND_THRESHOLD = 1e-12


@dataclass(frozen=True, eq=False)
class Precoder:
    """Unit-norm precoding vectors, row k = w_k (all-zero for inactive users)."""

    W: np.ndarray  # K x M
    users: np.ndarray
    kind: str

    def vector(self, k: int) -> np.ndarray:
        return self.W[k]


def _align_phase(w: np.ndarray, reference: np.ndarray) -> np.ndarray:
    """Rotate w so that reference^H w is real and nonnegative."""
    inner = np.vdot(reference, w)
    magnitude = abs(inner)
    if magnitude == 0.0:
        return w
    return w * (np.conj(inner) / magnitude)


def _normalize(v: np.ndarray, reference: np.ndarray) -> np.ndarray:
    norm = np.linalg.norm(v)
    if norm == 0.0 or not np.isfinite(norm):
        raise DegenerateChannelError("precoding direction has zero or non-finite norm")
    return _align_phase(v / norm, reference)


def mrt(h_k: np.ndarray) -> np.ndarray:
    """Maximum-ratio transmission: w = h_k / ||h_k||."""
    h_k = np.asarray(h_k, dtype=complex)
    norm = np.linalg.norm(h_k)
    if norm == 0.0:
        raise DegenerateChannelError("degenerate channel: h_k is the zero vector")
    return h_k / norm


def effective_channel_matrix(k: int, H: np.ndarray, Lambda_k: Sequence[int]) -> np.ndarray:
    """Q_k = [h_k, h_Lambda_k(1), ..., h_Lambda_k(D_k)] as an M x (D_k + 1) matrix."""
    rows = [k] + [int(l) for l in Lambda_k]
    return H[rows].T


def effective_fading_matrix(k: int, G: np.ndarray, Lambda_k: Sequence[int]) -> np.ndarray:
    """F_k with rows g_k, g_Lambda_k(1), ..., g_Lambda_k(D_k): a (D_k + 1) x M matrix."""
    rows = [k] + [int(l) for l in Lambda_k]
    return G[rows]


def zf_solution(Q: np.ndarray) -> np.ndarray:
    """
    Unnormalized ZF direction Q (Q^H Q)^{-1} e_1 via one Hermitian solve.

    Raises:
        ZFInfeasibleError: more constraints than antennas, or Q^H Q numerically singular
    """
    M, columns = Q.shape
    if columns > M:
        raise ZFInfeasibleError(
            f"ZF infeasible: D_k + 1 = {columns} constraints exceed M = {M} antennas"
        )

    gram = Q.conj().T @ Q
    with np.errstate(divide="ignore"):
        rcond = 1.0 / np.linalg.cond(gram)
    if not np.isfinite(rcond) or rcond < RCOND_THRESHOLD:
        raise ZFInfeasibleError(
            f"ZF infeasible: Q^H Q is numerically rank-deficient (rcond={rcond:.3e})"
        )

    try:
        factor = cho_factor(gram)
    except LinAlgError as e:
        raise ZFInfeasibleError(f"ZF infeasible: Cholesky factorization failed ({e})") from e

    e1 = np.zeros(columns, dtype=complex)
    e1[0] = 1.0
    return Q @ cho_solve(factor, e1)


def zf(k: int, H: np.ndarray, Lambda_k: Sequence[int]) -> np.ndarray:
    """Cache-reduced zero-forcing precoder nulling every user in Lambda_k."""
    Q = effective_channel_matrix(k, H, Lambda_k)
    return _normalize(zf_solution(Q), H[k])


def rzf(k: int, G_fading: np.ndarray, Lambda_k: Sequence[int], alpha_k: float) -> np.ndarray:
    """
    Cache-reduced regularized ZF: (F^H F + alpha I)^{-1} g_k, normalized.

    The (D_k + 1) x (D_k + 1) dual system is solved unless M < D_k + 1.
    alpha_k = 0 falls back to a pseudo-inverse solve (ZF limit); compute_precoders
    never passes it.
    """
    if alpha_k < 0:
        raise InvalidRegularizerError(f"invalid regularizer: alpha_k={alpha_k} < 0")

    F = effective_fading_matrix(k, G_fading, Lambda_k)
    rows, M = F.shape
    g_k = F[0]
    # With Fc = conj(F), Fc^H Fc = sum_n f_n f_n^H and Fc^H = F^T.
    Fc = F.conj()

    if alpha_k == 0:
        gram = Fc @ F.T
        e1 = np.zeros(rows, dtype=complex)
        e1[0] = 1.0
        v = F.T @ (np.linalg.pinv(gram) @ e1)
    elif M < rows:
        A = F.T @ Fc + alpha_k * np.eye(M)
        v = cho_solve(cho_factor(A), g_k)
    else:
        B = Fc @ F.T + alpha_k * np.eye(rows)
        e1 = np.zeros(rows, dtype=complex)
        e1[0] = 1.0
        v = F.T @ cho_solve(cho_factor(B), e1)

    return _normalize(v, g_k)


def compute_precoders(
    kind: PrecoderKind,
    channel: ChannelRealization,
    sets: DerivedSets,
    alpha: Optional[float] = None,
    logger: Optional[logging.Logger] = None,
) -> Precoder:
    """
    Compute the precoder of every active user.

    Args:
        kind: "mrt", "zf" or "rzf"
        channel: current realization
        sets: derived sets of the cache state (baseline: empty-cache sets)
        alpha: RZF regularizer alpha = xi * M (required for "rzf")
    """
    logger = logger or logging.getLogger(__name__)
    if kind not in PRECODER_KINDS:
        raise ValueError(f"Unknown precoder kind: {kind}")
    if kind == "rzf":
        if alpha is None:
            raise InvalidRegularizerError("RZF precoding needs a regularizer alpha")
        if not alpha > 0:
            raise InvalidRegularizerError(f"invalid regularizer: alpha={alpha} must be positive")

    W = np.zeros(channel.H.shape, dtype=complex)
    for k in sets.active:
        k = int(k)
        if kind == "mrt":
            W[k] = _align_phase(mrt(channel.H[k]), channel.H[k])
        elif kind == "zf":
            W[k] = zf(k, channel.H, sets.Lambda[k])
        else:
            W[k] = rzf(k, channel.G, sets.Lambda[k], alpha)

    logger.debug(f"Computed {kind} precoders for {sets.K_bar} active users")
    return Precoder(W=W, users=sets.active.copy(), kind=kind)

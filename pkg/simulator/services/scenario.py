"""
Scenario service: system configuration, cache placement, request generation
and the cache-dependent index sets that drive precoding and rate evaluation.
"""

import logging
import math
from dataclasses import dataclass
from typing import Dict, FrozenSet, Iterable, Literal, Optional, Sequence, Tuple, Union

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

from services.errors import NoActiveUsersError

logger = logging.getLogger(__name__)

DEFAULT_E0 = 10.0
DEFAULT_SIGMA2 = 1.0
SNR_TOLERANCE_DB = 1e-9


class SystemConfig(BaseModel):
    """All parameters of one cache-aided downlink scenario."""

    model_config = ConfigDict(frozen=True, extra="forbid")

    M: int = Field(64, ge=1, description="BS antenna count")
    K: int = Field(32, ge=1, description="user count")
    L_b: int = Field(100, ge=1, description="library size in files")
    L_u: int = Field(20, ge=0, description="cache capacity in files")
    file_size_mb: float = Field(1.0, gt=0, description="file size F in MBytes (metadata)")
    snr_db: Optional[float] = None
    E0: Optional[float] = Field(None, gt=0)
    sigma2: Optional[float] = Field(None, gt=0)
    beta: Union[float, Tuple[float, ...]] = 0.5
    seed: int = Field(0, ge=0, lt=2**64)
    precoder: Literal["mrt", "zf", "rzf"] = "mrt"
    mode: Literal["proposed", "baseline"] = "proposed"
    xi: float = Field(0.1, gt=0, description="normalized RZF regularizer alpha/M")

    @model_validator(mode="before")
    @classmethod
    def _resolve_power(cls, data):
        """Fill in whichever of snr_db, E0, sigma2 is missing."""
        if not isinstance(data, dict):
            return data
        data = dict(data)
        snr_db, e0, sigma2 = data.get("snr_db"), data.get("E0"), data.get("sigma2")
        given = sum(value is not None for value in (snr_db, e0, sigma2))

        if given < 2:
            if sigma2 is None:
                sigma2 = DEFAULT_SIGMA2
            if e0 is None and snr_db is None:
                e0 = DEFAULT_E0

        if snr_db is None:
            snr_db = 10.0 * math.log10(float(e0) / float(sigma2))
        elif e0 is None:
            e0 = float(sigma2) * 10.0 ** (float(snr_db) / 10.0)
        elif sigma2 is None:
            sigma2 = float(e0) / 10.0 ** (float(snr_db) / 10.0)
        elif float(e0) > 0 and float(sigma2) > 0:
            implied = 10.0 * math.log10(float(e0) / float(sigma2))
            if abs(implied - float(snr_db)) > SNR_TOLERANCE_DB:
                raise ValueError(
                    f"snr_db={snr_db} disagrees with E0/sigma2 ({implied:.12g} dB)"
                )

        data.update(snr_db=snr_db, E0=e0, sigma2=sigma2)
        return data

    @field_validator("beta", mode="before")
    @classmethod
    def _coerce_beta(cls, value):
        if isinstance(value, (list, tuple, np.ndarray)):
            return tuple(float(b) for b in value)
        return value

    @model_validator(mode="after")
    def _check_invariants(self):
        if self.L_u > self.L_b:
            raise ValueError(f"L_u={self.L_u} exceeds library size L_b={self.L_b}")
        betas = self.beta if isinstance(self.beta, tuple) else (self.beta,)
        if isinstance(self.beta, tuple) and len(betas) != self.K:
            raise ValueError(f"beta has {len(betas)} entries for K={self.K} users")
        if any(b <= 0 for b in betas):
            raise ValueError("every large-scale coefficient beta_k must be positive")
        return self

    @property
    def beta_vector(self) -> np.ndarray:
        """Per-user large-scale coefficients as a length-K array."""
        if isinstance(self.beta, tuple):
            return np.asarray(self.beta, dtype=float)
        return np.full(self.K, float(self.beta))

    @property
    def common_beta(self) -> float:
        """The single beta shared by all users (asymptotic analysis assumes one)."""
        betas = self.beta_vector
        if not np.all(betas == betas[0]):
            raise ValueError("asymptotic RZF analysis requires identical beta_k")
        return float(betas[0])

    @property
    def caching_probability(self) -> float:
        return self.L_u / self.L_b

    @property
    def alpha(self) -> float:
        """Unnormalized RZF regularizer alpha = xi * M."""
        return self.xi * self.M


@dataclass(frozen=True, eq=False)
class CacheState:
    """Cached files, requests and the derived cache-status matrix c."""

    member: np.ndarray  # K x L_b, member[l, f] is True when user l caches file f
    request: np.ndarray  # length K
    c: np.ndarray  # K x K, c[k, l] == 0 iff request[k] is cached at user l

    @property
    def K(self) -> int:
        return int(self.request.size)

    @property
    def cached(self) -> Tuple[FrozenSet[int], ...]:
        return tuple(frozenset(np.flatnonzero(row).tolist()) for row in self.member)


@dataclass(frozen=True, eq=False)
class DerivedSets:
    """Active users with their interference sets U_k and constraint sets Lambda_k."""

    active: np.ndarray
    K_bar: int
    U: Dict[int, np.ndarray]
    Lambda: Dict[int, np.ndarray]
    N: Dict[int, int]
    D: Dict[int, int]
    interference_mask: np.ndarray  # [k, l] True when l is in U_k
    constraint_mask: np.ndarray  # [k, l] True when l is in Lambda_k

    @property
    def K(self) -> int:
        return int(self.interference_mask.shape[0])

    def is_active(self, k: int) -> bool:
        return k in self.U


@dataclass(frozen=True, eq=False)
class PowerAllocation:
    """Per-user transmit powers E_k, zero for inactive users."""

    E: np.ndarray

    @property
    def total(self) -> float:
        return float(np.sum(self.E))


def place_caches(config: SystemConfig, rng: np.random.Generator) -> np.ndarray:
    """
    Fill every user's cache with L_u distinct files drawn uniformly at random.

    Returns:
        K x L_u integer array, row l holding the sorted file indices of user l.
    """
    if config.L_u == 0:
        return np.empty((config.K, 0), dtype=np.int64)

    library = np.tile(np.arange(config.L_b, dtype=np.int64), (config.K, 1))
    shuffled = rng.permuted(library, axis=1)
    return np.sort(shuffled[:, : config.L_u], axis=1)


def draw_requests(config: SystemConfig, rng: np.random.Generator) -> np.ndarray:
    """Draw one uniformly distributed file request per user."""
    return rng.integers(0, config.L_b, size=config.K, dtype=np.int64)


def build_cache_state(
    cached: Union[np.ndarray, Sequence[Iterable[int]]],
    request: Sequence[int],
    L_b: Optional[int] = None,
) -> CacheState:
    """
    Build the cache-status matrix from cached files and requests.

    Args:
        cached: K x L_u array of file indices, or one iterable of file indices per user
        request: requested file index per user
        L_b: library size (inferred from the largest index when omitted)

    Returns:
        CacheState with c[k, l] = 0 iff request[k] is cached at user l
    """
    request = np.asarray(request, dtype=np.int64).reshape(-1)
    K = request.size

    if isinstance(cached, np.ndarray) and cached.ndim == 2:
        rows = cached.astype(np.int64)
        largest = max(int(rows.max(initial=-1)), int(request.max(initial=-1)))
        L_b = L_b or largest + 1
        member = np.zeros((K, L_b), dtype=bool)
        member[np.arange(K)[:, None], rows] = True
    else:
        sets = [frozenset(int(f) for f in files) for files in cached]
        if len(sets) != K:
            raise ValueError(f"got {len(sets)} caches for {K} requests")
        largest = max([max(s) for s in sets if s] + [int(request.max(initial=-1))])
        L_b = L_b or largest + 1
        member = np.zeros((K, L_b), dtype=bool)
        for l, files in enumerate(sets):
            member[l, list(files)] = True

    # member[l, request[k]] laid out as [l, k]; transpose to [k, l].
    hit = member[:, request].T
    c = np.where(hit, 0, 1).astype(np.int8)
    return CacheState(member=member, request=request, c=c)


def baseline_cache_state(K: int) -> CacheState:
    """Empty caches: every user is active and interferes with every other user."""
    return build_cache_state([()] * K, np.zeros(K, dtype=np.int64), L_b=1)


def draw_cache_state(config: SystemConfig, rng: np.random.Generator) -> CacheState:
    """Place caches and draw requests for the configured mode."""
    if config.mode == "baseline":
        return baseline_cache_state(config.K)
    cached = place_caches(config, rng)
    request = draw_requests(config, rng)
    return build_cache_state(cached, request, L_b=config.L_b)


def derive_sets(cs: CacheState) -> DerivedSets:
    """Derive the active set, U_k, Lambda_k and their sizes from a cache state."""
    c = cs.c.astype(bool)
    K = c.shape[0]
    active_flags = np.diag(c).copy()
    off_diagonal = ~np.eye(K, dtype=bool)

    # U_k = {l != k : c_ll = 1, c_lk = 1};  Lambda_k = {l != k : c_ll = 1, c_kl = 1}
    interference = active_flags[None, :] & c.T & off_diagonal
    constraint = active_flags[None, :] & c & off_diagonal
    interference[~active_flags] = False
    constraint[~active_flags] = False

    active = np.flatnonzero(active_flags)
    U = {int(k): np.flatnonzero(interference[k]) for k in active}
    Lambda = {int(k): np.flatnonzero(constraint[k]) for k in active}

    return DerivedSets(
        active=active,
        K_bar=int(active.size),
        U=U,
        Lambda=Lambda,
        N={k: int(members.size) for k, members in U.items()},
        D={k: int(members.size) for k, members in Lambda.items()},
        interference_mask=interference,
        constraint_mask=constraint,
    )


def uniform_power(sets: DerivedSets, config: SystemConfig) -> PowerAllocation:
    """Split the power budget E0 evenly across the active users."""
    if sets.K_bar == 0:
        raise NoActiveUsersError("no active users: every request is served from cache")

    E = np.zeros(sets.K)
    E[sets.active] = config.E0 / sets.K_bar
    return PowerAllocation(E=E)

"""Position-based alpha-partitioning of a permuted candidate pool.

Lane ``r`` takes the dedicated positions ``r, r+M, ..., r+(k_ded-1)M`` and
then the shared suffix ``[M*k_ded, M*k_ded + k_shr)``, which every lane reads
identically. Nothing here depends on any other lane's output.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import IO, Iterable

import numpy as np

from lanekit.core import ConfigError, HeterogeneousPartitionConfig, PartitionConfig


@dataclass(frozen=True)
class LaneAssignment:
    lane_id: int
    dedicated_positions: np.ndarray
    shared_positions: np.ndarray
    selected_ids: np.ndarray

    @property
    def positions(self) -> np.ndarray:
        return np.concatenate([self.dedicated_positions, self.shared_positions])

    def to_record(self, query_id: int) -> dict:
        return {
            "query_id": int(query_id),
            "lane_id": int(self.lane_id),
            "positions": [int(p) for p in self.positions],
            "ids": [int(i) for i in self.selected_ids],
        }


def _as_pool(pool) -> np.ndarray:
    return np.ascontiguousarray(pool, dtype=np.uint64)


def _check_lane(lane_id: int, M: int) -> int:
    lane_id = int(lane_id)
    if not 0 <= lane_id < M:
        raise ConfigError(f"lane_id {lane_id} out of range [0, {M})")
    return lane_id


def alpha_partition(
    pool, cfg: PartitionConfig, lane_id: int, *, scan_backfill: bool = False
) -> LaneAssignment:
    """Select lane ``lane_id``'s candidates from the permuted ``pool``.

    ``scan_backfill=True`` switches to the scan-from-position-0 backfill
    (fill up with the first unchosen pool entries). That variant reuses other
    lanes' dedicated positions when ``0 < alpha < 1`` and so does not obey the
    coverage law; it exists only for side-by-side comparison.
    """
    pool = _as_pool(pool)
    lane_id = _check_lane(lane_id, cfg.M)
    if pool.size != cfg.K_pool:
        raise ConfigError(f"pool has {pool.size} entries, config expects K_pool={cfg.K_pool}")
    M, k_ded, k_shr = cfg.M, cfg.k_ded, cfg.k_shr

    dedicated = np.arange(lane_id, lane_id + k_ded * M, M, dtype=np.int64)
    if not scan_backfill:
        start = M * k_ded
        shared = np.arange(start, start + k_shr, dtype=np.int64)
    else:
        taken = np.zeros(pool.size, dtype=bool)
        taken[dedicated] = True
        free = np.flatnonzero(~taken)
        shared = free[:k_shr].astype(np.int64)
    positions = np.concatenate([dedicated, shared])
    return LaneAssignment(lane_id, dedicated, shared, pool[positions])


def heterogeneous_dedicated_blocks(k_ded: Iterable[int]) -> list[np.ndarray]:
    """Round-robin layout of per-lane dedicated blocks.

    Walk positions ``0, 1, 2, ...`` cycling through lanes in id order and skip
    lanes whose quota is already filled. Blocks are pairwise disjoint and
    together cover exactly ``[0, sum(k_ded))``. With equal quotas this is the
    homogeneous congruence-class layout.
    """
    quotas = [int(q) for q in k_ded]
    blocks: list[list[int]] = [[] for _ in quotas]
    remaining = list(quotas)
    pos = 0
    total = sum(quotas)
    while pos < total:
        for r in range(len(quotas)):
            if remaining[r] > 0:
                blocks[r].append(pos)
                remaining[r] -= 1
                pos += 1
    return [np.asarray(b, dtype=np.int64) for b in blocks]


def alpha_partition_heterogeneous(
    pool, cfg: HeterogeneousPartitionConfig, lane_id: int
) -> LaneAssignment:
    pool = _as_pool(pool)
    lane_id = _check_lane(lane_id, cfg.M)
    if pool.size != cfg.K_pool:
        raise ConfigError(f"pool has {pool.size} entries, config expects K_pool={cfg.K_pool}")
    dedicated = heterogeneous_dedicated_blocks(cfg.k_ded)[lane_id]
    start = cfg.shared_start
    shared = np.arange(start, start + cfg.k_shr[lane_id], dtype=np.int64)
    positions = np.concatenate([dedicated, shared])
    return LaneAssignment(lane_id, dedicated, shared, pool[positions])


def partition_all(pool, cfg: PartitionConfig, **kw) -> list[LaneAssignment]:
    return [alpha_partition(pool, cfg, r, **kw) for r in range(cfg.M)]


def coverage(cfg: PartitionConfig) -> int:
    """Predicted ``|S_union|``: ``M*k_ded + k_shr`` with floored ``k_ded``."""
    return cfg.M * cfg.k_ded + cfg.k_shr


def coverage_continuous(M: int, k_lane: int, alpha: float) -> float:
    """``k_lane * (1 + alpha*(M-1))``; equals ``coverage`` when ``alpha*k_lane`` is integral."""
    return k_lane * (1.0 + alpha * (M - 1))


def predicted_gain(rho0: float, M: int) -> float:
    """Expected lift from alpha=0 to alpha=1: ``M / (1 + (M-1)(1-rho0))``."""
    if not 0.0 <= rho0 <= 1.0:
        raise ValueError(f"rho0 must lie in [0, 1], got {rho0}")
    if M < 1:
        raise ValueError(f"M must be >= 1, got {M}")
    return M / (1.0 + (M - 1) * (1.0 - rho0))


def approx_union_from_rho0(rho0: float, M: int, k_lane: int) -> float:
    """Closed-form estimate of the alpha=0 distinct coverage."""
    return k_lane * (1.0 + (M - 1) * (1.0 - rho0))


def recommend_alpha(rho0: float) -> float:
    if not 0.0 <= rho0 <= 1.0:
        raise ValueError(f"rho0 must lie in [0, 1], got {rho0}")
    if rho0 >= 0.9:
        return 1.0
    if rho0 >= 0.6:
        return 0.7
    return 0.5


def max_feasible_alpha(M: int, k_lane: int, K_pool: int) -> float | None:
    """Largest ``alpha = k_ded/k_lane`` that still fits ``K_pool``, or None."""
    if K_pool < k_lane:
        return None
    if M == 1:
        return 1.0
    k_ded = min(k_lane, (K_pool - k_lane) // (M - 1))
    return k_ded / k_lane


def write_assignments(fh: IO[str], query_id: int, assignments: Iterable[LaneAssignment]) -> None:
    """Append one JSON line per lane assignment."""
    for a in assignments:
        fh.write(json.dumps(a.to_record(query_id)) + "\n")

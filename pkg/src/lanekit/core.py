"""Domain types shared by the planner, index, lanes and metrics modules."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Mapping, Sequence

import numpy as np

U64_MASK = 0xFFFFFFFFFFFFFFFF


class ConfigError(ValueError):
    """Raised for invalid or infeasible partition configurations."""


def _check_int(name: str, value: Any, minimum: int) -> int:
    if isinstance(value, bool) or not isinstance(value, (int, np.integer)):
        raise ConfigError(f"{name} must be an integer, got {value!r}")
    value = int(value)
    if value < minimum:
        raise ConfigError(f"{name} must be >= {minimum}, got {value}")
    return value


def _check_alpha(alpha: Any) -> float:
    try:
        alpha = float(alpha)
    except (TypeError, ValueError):
        raise ConfigError(f"alpha must be a number, got {alpha!r}") from None
    if not (0.0 <= alpha <= 1.0):
        raise ConfigError(f"alpha must lie in [0, 1], got {alpha}")
    return alpha


def _check_seed(seed: Any) -> int:
    seed = _check_int("query_seed", seed, 0)
    if seed > U64_MASK:
        raise ConfigError(f"query_seed must fit in 64 bits, got {seed}")
    return seed


def dedicated_quota(alpha: float, k_lane: int) -> int:
    # floor(alpha * k_lane) with a guard for values like 0.7 * 10 = 6.999...
    raw = alpha * k_lane
    k_ded = math.floor(raw)
    if math.isclose(raw, k_ded + 1, rel_tol=0.0, abs_tol=1e-9):
        k_ded += 1
    return min(max(k_ded, 0), k_lane)


@dataclass(frozen=True)
class PartitionConfig:
    """Homogeneous lane partition: ``M`` lanes with ``k_lane`` candidates each.

    Infeasible configurations (pool too small for the dedicated blocks plus
    the shared suffix) are rejected here rather than clamped later.
    """

    M: int
    k_lane: int
    alpha: float
    K_pool: int
    query_seed: int = 0

    def __post_init__(self) -> None:
        object.__setattr__(self, "M", _check_int("M", self.M, 1))
        object.__setattr__(self, "k_lane", _check_int("k_lane", self.k_lane, 1))
        object.__setattr__(self, "alpha", _check_alpha(self.alpha))
        object.__setattr__(self, "K_pool", _check_int("K_pool", self.K_pool, 1))
        object.__setattr__(self, "query_seed", _check_seed(self.query_seed))
        need = self.M * self.k_ded + self.k_shr
        if self.K_pool < need:
            raise ConfigError(
                f"infeasible: K_pool={self.K_pool} < M*k_ded + k_shr = {need} "
                f"(M={self.M}, k_lane={self.k_lane}, alpha={self.alpha})"
            )

    @property
    def k_ded(self) -> int:
        return dedicated_quota(self.alpha, self.k_lane)

    @property
    def k_shr(self) -> int:
        return self.k_lane - self.k_ded

    @property
    def k_total(self) -> int:
        return self.M * self.k_lane

    @property
    def shared_start(self) -> int:
        """Pool position where the shared suffix begins."""
        return self.M * self.k_ded

    def with_seed(self, query_seed: int) -> "PartitionConfig":
        return PartitionConfig(self.M, self.k_lane, self.alpha, self.K_pool, query_seed)

    def with_alpha(self, alpha: float) -> "PartitionConfig":
        return PartitionConfig(self.M, self.k_lane, alpha, self.K_pool, self.query_seed)

    @classmethod
    def from_dict(cls, doc: Mapping[str, Any]) -> "PartitionConfig":
        allowed = {"M", "k_lane", "alpha", "K_pool", "query_seed"}
        unknown = set(doc) - allowed
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        missing = {"M", "k_lane", "alpha", "K_pool"} - set(doc)
        if missing:
            raise ConfigError(f"missing config keys: {sorted(missing)}")
        return cls(
            M=doc["M"],
            k_lane=doc["k_lane"],
            alpha=doc["alpha"],
            K_pool=doc["K_pool"],
            query_seed=doc.get("query_seed", 0),
        )

    @classmethod
    def from_json(cls, text_or_path: str | Path) -> "PartitionConfig":
        path = Path(text_or_path) if not str(text_or_path).lstrip().startswith("{") else None
        text = path.read_text() if path is not None else str(text_or_path)
        doc = json.loads(text)
        if not isinstance(doc, dict):
            raise ConfigError("config JSON must be an object")
        return cls.from_dict(doc)

    def to_dict(self) -> dict[str, Any]:
        return {
            "M": self.M,
            "k_lane": self.k_lane,
            "alpha": self.alpha,
            "K_pool": self.K_pool,
            "query_seed": self.query_seed,
        }


@dataclass(frozen=True)
class HeterogeneousPartitionConfig:
    """Lanes with unequal budgets; one shared suffix serves every lane."""

    lane_budgets: tuple[int, ...]
    alpha: float
    K_pool: int
    query_seed: int = 0

    def __post_init__(self) -> None:
        budgets = tuple(_check_int("lane budget", b, 1) for b in self.lane_budgets)
        if not budgets:
            raise ConfigError("lane_budgets must be non-empty")
        object.__setattr__(self, "lane_budgets", budgets)
        object.__setattr__(self, "alpha", _check_alpha(self.alpha))
        object.__setattr__(self, "K_pool", _check_int("K_pool", self.K_pool, 1))
        object.__setattr__(self, "query_seed", _check_seed(self.query_seed))
        need = sum(self.k_ded) + max(self.k_shr)
        if self.K_pool < need:
            raise ConfigError(
                f"infeasible: K_pool={self.K_pool} < sum(k_ded) + max(k_shr) = {need}"
            )

    @property
    def M(self) -> int:
        return len(self.lane_budgets)

    @property
    def k_ded(self) -> tuple[int, ...]:
        return tuple(dedicated_quota(self.alpha, b) for b in self.lane_budgets)

    @property
    def k_shr(self) -> tuple[int, ...]:
        return tuple(b - d for b, d in zip(self.lane_budgets, self.k_ded))

    @property
    def k_total(self) -> int:
        return sum(self.lane_budgets)

    @property
    def shared_start(self) -> int:
        return sum(self.k_ded)


def derive_quotas(cfg: PartitionConfig) -> tuple[int, int, int]:
    """Return ``(k_ded, k_shr, k_total)`` for a validated config."""
    return cfg.k_ded, cfg.k_shr, cfg.k_total


@dataclass
class CostCounters:
    """Per-call work counters. Add them to aggregate across lanes."""

    node_visits: int = 0
    list_scans: int = 0
    vectors_scored: int = 0
    planner_time: float = 0.0  # seconds

    def __add__(self, other: "CostCounters") -> "CostCounters":
        return CostCounters(
            self.node_visits + other.node_visits,
            self.list_scans + other.list_scans,
            self.vectors_scored + other.vectors_scored,
            self.planner_time + other.planner_time,
        )

    @classmethod
    def total(cls, parts: Sequence["CostCounters"]) -> "CostCounters":
        out = cls()
        for p in parts:
            out = out + p
        return out

    def work(self) -> tuple[int, int, int]:
        """Deterministic counters only (timing excluded)."""
        return self.node_visits, self.list_scans, self.vectors_scored

    def to_dict(self) -> dict[str, Any]:
        return {
            "node_visits": self.node_visits,
            "list_scans": self.list_scans,
            "vectors_scored": self.vectors_scored,
            "planner_time": self.planner_time,
        }


@dataclass
class LaneResult:
    lane_id: int
    selected: np.ndarray  # uint64 ids, best first
    keys: np.ndarray  # float64 ranking keys (ascending), aligned with selected
    cost: CostCounters = field(default_factory=CostCounters)
    wall_time: float = 0.0

    def __post_init__(self) -> None:
        self.selected = np.asarray(self.selected, dtype=np.uint64)
        self.keys = np.asarray(self.keys, dtype=np.float64)
        if self.selected.shape != self.keys.shape:
            raise ValueError("selected and keys must have the same length")
        if np.unique(self.selected).size != self.selected.size:
            raise ValueError(f"lane {self.lane_id} selected duplicate ids")


@dataclass
class MergedResult:
    union_ids: frozenset[int]
    topk: list[tuple[int, float]]
    overlap_rho: float
    union_size: int

    @property
    def topk_ids(self) -> list[int]:
        return [i for i, _ in self.topk]

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from lanekit.core import CostCounters
from lanekit.index._kernels import METRIC_IP, METRIC_L2, keys_all, keys_rows


class SearchError(ValueError):
    """Invalid request against an index (bad dimension, budget or list id)."""


class Metric(str, Enum):
    L2 = "l2"
    IP = "ip"

    @property
    def code(self) -> int:
        return METRIC_L2 if self is Metric.L2 else METRIC_IP

    def key_to_score(self, keys: np.ndarray) -> np.ndarray:
        """Internal keys are ascending-is-better; IP scores are similarities."""
        return keys.copy() if self is Metric.L2 else -keys


class Dataset:
    """Base vectors with implicit ids ``0..N-1``."""

    def __init__(self, vectors, metric: Metric | str = Metric.L2, *, unit_tol: float = 1e-4):
        X = np.ascontiguousarray(vectors, dtype=np.float32)
        if X.ndim != 2 or X.shape[1] < 1:
            raise ValueError(f"vectors must be an N x d matrix with d >= 1, got shape {X.shape}")
        if not np.isfinite(X).all():
            raise ValueError("vectors contain non-finite values")
        self.metric = Metric(metric)
        if self.metric is Metric.IP and X.shape[0]:
            norms = np.linalg.norm(X.astype(np.float64), axis=1)
            worst = float(np.max(np.abs(norms - 1.0)))
            if worst > unit_tol:
                raise ValueError(f"inner-product datasets must be unit-normalized (max |norm-1| = {worst:.2e})")
        X.setflags(write=False)
        self.vectors = X

    @property
    def N(self) -> int:
        return self.vectors.shape[0]

    @property
    def d(self) -> int:
        return self.vectors.shape[1]

    def as_query(self, query) -> np.ndarray:
        q = np.asarray(query)
        if q.ndim != 1 or q.shape[0] != self.d:
            raise SearchError(f"query dimension {q.shape} does not match dataset d={self.d}")
        # widen through float32 so keys match stored-vector arithmetic
        return np.ascontiguousarray(q.astype(np.float32).astype(np.float64))

    def keys_for(self, q64: np.ndarray, ids) -> np.ndarray:
        ids = np.ascontiguousarray(ids, dtype=np.int64)
        return keys_rows(self.vectors, ids, q64, self.metric.code)

    def keys_all(self, q64: np.ndarray) -> np.ndarray:
        return keys_all(self.vectors, q64, self.metric.code)


@dataclass
class SearchResult:
    ids: np.ndarray  # int64, best first
    keys: np.ndarray  # float64 ranking keys, ascending
    cost: CostCounters = field(default_factory=CostCounters)
    metric: Metric = Metric.L2

    @property
    def scores(self) -> np.ndarray:
        return self.metric.key_to_score(self.keys)

    def pairs(self) -> list[tuple[int, float]]:
        return [(int(i), float(s)) for i, s in zip(self.ids, self.scores)]


@dataclass
class CandidatePool:
    """One query's candidate superset in enumeration order.

    ``list_ids``/``list_sizes`` are set only for IVF: the coarse lists (nearest
    first) whose members make up ``ids``.
    """

    ids: np.ndarray  # uint64
    cost: CostCounters
    list_ids: np.ndarray | None = None
    list_sizes: np.ndarray | None = None

    def __len__(self) -> int:
        return int(self.ids.size)


@dataclass(frozen=True)
class SearchBudget:
    """Exactly one of ``ef_search`` (HNSW), ``probe_lists`` (IVF) or ``k`` (brute force)."""

    ef_search: int | None = None
    probe_lists: tuple[int, ...] | None = None
    k: int | None = None

    def __post_init__(self) -> None:
        active = [x is not None for x in (self.ef_search, self.probe_lists, self.k)]
        if sum(active) != 1:
            raise SearchError("SearchBudget needs exactly one of ef_search, probe_lists, k")

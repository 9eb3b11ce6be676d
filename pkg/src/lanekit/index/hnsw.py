"""HNSW-lite: layered proximity graph with plain (non-heuristic) neighbor selection."""

from __future__ import annotations

import math

import numpy as np

from lanekit.core import CostCounters
from lanekit.index import _kernels as K
from lanekit.index.base import CandidatePool, Dataset, SearchError, SearchResult


def draw_levels(n: int, graph_degree: int, seed: int) -> np.ndarray:
    """Geometric level assignment with scale ``1/ln(graph_degree)``."""
    rng = np.random.default_rng(seed)
    u = rng.random(n)
    scale = 1.0 / math.log(max(graph_degree, 2))
    return np.floor(-np.log1p(-u) * scale).astype(np.int32)


class HnswLiteIndex:
    family = "hnsw"

    def __init__(
        self,
        dataset: Dataset,
        links: np.ndarray,
        counts: np.ndarray,
        levels: np.ndarray,
        entry_point: int,
        max_level: int,
        graph_degree: int,
        ef_construction: int,
        seed: int,
    ):
        self.dataset = dataset
        self.links = links
        self.counts = counts
        self.levels = levels
        self.entry_point = int(entry_point)
        self.max_level = int(max_level)
        self.graph_degree = int(graph_degree)
        self.ef_construction = int(ef_construction)
        self.seed = int(seed)
        for arr in (links, counts, levels):
            arr.setflags(write=False)

    @property
    def params(self) -> dict:
        return {"graph_degree": self.graph_degree, "ef_construction": self.ef_construction}

    def neighbors(self, node: int, layer: int = 0) -> np.ndarray:
        return self.links[layer, node, : self.counts[layer, node]].copy()

    def search(self, query, ef_search: int, k: int, *, start_node: int = -1) -> SearchResult:
        """Beam search; ``cost.node_visits`` counts distance evaluations."""
        if self.dataset.N == 0:
            raise SearchError("search on an empty index")
        if k < 1 or ef_search < k:
            raise SearchError(f"need 1 <= k <= ef_search, got k={k}, ef_search={ef_search}")
        q = self.dataset.as_query(query)
        keys, ids, visits = K.hnsw_search(
            self.dataset.vectors, self.links, self.counts, self.entry_point,
            self.max_level, self.dataset.metric.code, q, int(ef_search), int(start_node),
        )
        cost = CostCounters(node_visits=int(visits), vectors_scored=int(visits))
        return SearchResult(ids[:k].astype(np.int64), keys[:k], cost, self.dataset.metric)

    def enumerate_pool(self, query, K_pool: int) -> CandidatePool:
        if K_pool > self.dataset.N:
            raise SearchError(f"K_pool={K_pool} exceeds N={self.dataset.N}")
        res = self.search(query, ef_search=K_pool, k=K_pool)
        return CandidatePool(res.ids.astype(np.uint64), res.cost)

    def single_search(self, query, k_total: int, k: int) -> SearchResult:
        """The equal-cost ceiling: one search with ``ef_search = k_total``."""
        return self.search(query, ef_search=k_total, k=k)

    def reachable_from_entry(self) -> np.ndarray:
        seen = np.zeros(self.dataset.N, dtype=np.bool_)
        K.mark_reachable(self.links, self.counts, self.entry_point, seen)
        return seen


def _repair_reachability(vectors, metric, links, counts, entry) -> int:
    """Give every layer-0 node an in-edge from the entry's component.

    For an orphaned node, the nearest reachable node with spare capacity gets
    an extra edge to it. Returns the number of edges added.
    """
    n = vectors.shape[0]
    cap0 = links.shape[2]
    seen = np.zeros(n, dtype=np.bool_)
    K.mark_reachable(links, counts, entry, seen)
    added = 0
    for u in range(n):
        if seen[u]:
            continue
        donors = np.flatnonzero(seen & (counts[0] < cap0))
        if donors.size == 0:
            raise RuntimeError("cannot repair HNSW connectivity: every reachable node is at capacity")
        q = vectors[u].astype(np.float64)
        keys = K.keys_rows(vectors, donors.astype(np.int64), q, metric)
        donor = int(donors[np.lexsort((donors, keys))[0]])
        links[0, donor, counts[0, donor]] = u
        counts[0, donor] += 1
        added += 1
        K.mark_reachable(links, counts, u, seen)
    return added


def hnsw_build(
    ds: Dataset, graph_degree: int = 16, ef_construction: int = 100, seed: int = 0
) -> HnswLiteIndex:
    """Insert nodes ``0..N-1`` in order. Deterministic for a fixed seed."""
    if ds.N < 1:
        raise SearchError("cannot build an index over an empty dataset")
    if graph_degree < 1 or ef_construction < 1:
        raise ValueError("graph_degree and ef_construction must be >= 1")
    levels = draw_levels(ds.N, graph_degree, seed)
    top = int(levels.max())
    cap0 = 2 * graph_degree
    links = np.zeros((top + 1, ds.N, cap0), dtype=np.int32)
    counts = np.zeros((top + 1, ds.N), dtype=np.int32)
    entry, max_level = K.hnsw_build(
        ds.vectors, levels, ds.metric.code, int(graph_degree), int(ef_construction), links, counts
    )
    _repair_reachability(ds.vectors, ds.metric.code, links, counts, int(entry))
    return HnswLiteIndex(
        ds, links, counts, levels, int(entry), int(max_level), graph_degree, ef_construction, seed
    )

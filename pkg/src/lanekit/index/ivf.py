"""IVF-Flat with caller-routed list scans."""

from __future__ import annotations

from typing import Iterable, Sequence

import numpy as np

from lanekit.core import CostCounters
from lanekit.index import _kernels as K
from lanekit.index.base import CandidatePool, Dataset, SearchError, SearchResult

KMEANS_MAX_ITER = 25


def kmeans(
    X: np.ndarray, nlist: int, metric: int, seed: int, max_iter: int = KMEANS_MAX_ITER
) -> np.ndarray:
    """Lloyd iterations from ``nlist`` distinct sampled rows.

    An empty cluster keeps its previous centroid.
    """
    rng = np.random.default_rng(seed)
    init = np.sort(rng.choice(X.shape[0], size=nlist, replace=False))
    C = X[init].astype(np.float32).copy()
    labels = None
    for _ in range(max_iter):
        new_labels = K.assign_nearest(X, C, metric)
        if labels is not None and np.array_equal(new_labels, labels):
            break
        labels = new_labels
        sums, cnt = K.centroid_sums(X, labels, nlist)
        filled = cnt > 0
        C[filled] = (sums[filled] / cnt[filled, None]).astype(np.float32)
    return C


class IvfFlatIndex:
    family = "ivf"

    def __init__(
        self,
        dataset: Dataset,
        centroids: np.ndarray,
        assignment: np.ndarray,
        train_sample_size: int,
        seed: int,
    ):
        self.dataset = dataset
        self.centroids = np.ascontiguousarray(centroids, dtype=np.float32)
        self.assignment = np.ascontiguousarray(assignment, dtype=np.int64)
        self.train_sample_size = int(train_sample_size)
        self.seed = int(seed)
        nlist = self.centroids.shape[0]
        order = np.argsort(self.assignment, kind="stable")
        bounds = np.searchsorted(self.assignment[order], np.arange(nlist + 1))
        self._members = order.astype(np.int64)
        self._offsets = bounds.astype(np.int64)
        for arr in (self.centroids, self.assignment, self._members, self._offsets):
            arr.setflags(write=False)

    @property
    def nlist(self) -> int:
        return self.centroids.shape[0]

    @property
    def params(self) -> dict:
        return {"nlist": self.nlist, "train_sample_size": self.train_sample_size}

    def list_sizes(self) -> np.ndarray:
        return np.diff(self._offsets)

    def list_members(self, list_id: int) -> np.ndarray:
        return self._members[self._offsets[list_id] : self._offsets[list_id + 1]]

    def coarse_order(self, query) -> np.ndarray:
        """All list ids, nearest centroid first (ties by list id)."""
        q = self.dataset.as_query(query)
        keys = K.keys_all(self.centroids, q, self.dataset.metric.code)
        return np.lexsort((np.arange(self.nlist), keys)).astype(np.int64)

    def nearest_lists(self, query, nprobe: int) -> np.ndarray:
        return self.coarse_order(query)[:nprobe]

    def _check_lists(self, probe_lists: Iterable[int]) -> np.ndarray:
        lists = np.asarray(list(probe_lists), dtype=np.int64)
        if lists.size == 0:
            raise SearchError("probe_lists must be non-empty")
        bad = lists[(lists < 0) | (lists >= self.nlist)]
        if bad.size:
            raise SearchError(f"unknown list id(s) {bad.tolist()} (nlist={self.nlist})")
        if np.unique(lists).size != lists.size:
            raise SearchError("probe_lists repeats a list id")
        return lists

    def search_lists(self, query, probe_lists: Sequence[int], k: int) -> SearchResult:
        """Scan exactly ``probe_lists`` and return the best ``k`` entries found."""
        lists = self._check_lists(probe_lists)
        q = self.dataset.as_query(query)
        ids = np.concatenate([self.list_members(int(l)) for l in lists])
        keys = self.dataset.keys_for(q, ids)
        top_ids, top_keys = K.topk_ids(ids, keys, k)
        cost = CostCounters(list_scans=int(lists.size), vectors_scored=int(ids.size))
        return SearchResult(top_ids, top_keys, cost, self.dataset.metric)

    def lists_covering(self, query, n_candidates: int) -> np.ndarray:
        """Nearest lists, in order, until at least ``n_candidates`` ids are covered."""
        order = self.coarse_order(query)
        covered = np.cumsum(self.list_sizes()[order])
        n = int(np.searchsorted(covered, n_candidates, side="left")) + 1
        return order[: min(n, order.size)]

    def enumerate_pool(self, query, K_pool: int) -> CandidatePool:
        """Document pool = members of the covering lists; list pool = those lists."""
        if K_pool > self.dataset.N:
            raise SearchError(f"K_pool={K_pool} exceeds N={self.dataset.N}")
        lists = self.lists_covering(query, K_pool)
        ids = np.concatenate([self.list_members(int(l)) for l in lists]).astype(np.uint64)
        sizes = self.list_sizes()[lists]
        return CandidatePool(ids, CostCounters(), list_ids=lists, list_sizes=sizes)

    def single_search(self, query, k_total: int, k: int) -> SearchResult:
        """One scan over the nearest lists covering ``k_total`` candidates."""
        return self.search_lists(query, self.lists_covering(query, k_total), k)


def ivf_build(
    ds: Dataset, nlist: int = 128, train_sample_size: int = 16_384, seed: int = 0
) -> IvfFlatIndex:
    if not 1 <= nlist <= ds.N:
        raise SearchError(f"nlist={nlist} must lie in [1, N={ds.N}]")
    if nlist == ds.N:
        # every vector is its own centroid; duplicates would otherwise collapse lists
        centroids = ds.vectors.copy()
        assignment = np.arange(ds.N, dtype=np.int64)
        return IvfFlatIndex(ds, centroids, assignment, train_sample_size, seed)
    rng = np.random.default_rng(seed)
    if train_sample_size >= ds.N:
        train = ds.vectors
    else:
        rows = np.sort(rng.choice(ds.N, size=max(train_sample_size, nlist), replace=False))
        train = ds.vectors[rows]
    centroids = kmeans(np.ascontiguousarray(train), nlist, ds.metric.code, seed + 1)
    assignment = K.assign_nearest(ds.vectors, centroids, ds.metric.code)
    return IvfFlatIndex(ds, centroids, assignment, train_sample_size, seed)

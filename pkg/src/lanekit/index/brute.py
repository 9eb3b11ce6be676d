from __future__ import annotations

import numpy as np

from lanekit.core import CostCounters
from lanekit.index._kernels import topk_order
from lanekit.index.base import CandidatePool, Dataset, SearchError, SearchResult


def brute_force_topk(ds: Dataset, query, k: int) -> SearchResult:
    """Exact top-``k`` by exhaustive scan; ties go to the smaller id.

    This is the ground-truth oracle for every recall number in the package.
    """
    if not 1 <= k <= ds.N:
        raise SearchError(f"k={k} must lie in [1, N={ds.N}]")
    q = ds.as_query(query)
    keys = ds.keys_all(q)
    order = topk_order(keys, k)
    cost = CostCounters(vectors_scored=ds.N)
    return SearchResult(order, keys[order], cost, ds.metric)


class BruteForceIndex:
    family = "brute"

    def __init__(self, dataset: Dataset):
        self.dataset = dataset

    def search(self, query, k: int) -> SearchResult:
        return brute_force_topk(self.dataset, query, k)

    def enumerate_pool(self, query, K_pool: int) -> CandidatePool:
        if K_pool > self.dataset.N:
            raise SearchError(f"K_pool={K_pool} exceeds N={self.dataset.N}")
        res = brute_force_topk(self.dataset, query, K_pool)
        return CandidatePool(res.ids.astype(np.uint64), res.cost)

    def single_search(self, query, k_total: int, k: int) -> SearchResult:
        res = brute_force_topk(self.dataset, query, k_total)
        return SearchResult(res.ids[:k], res.keys[:k], res.cost, res.metric)

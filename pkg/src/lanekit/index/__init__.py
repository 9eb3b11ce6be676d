"""Desk-scale search engines: exact brute force, HNSW-lite and IVF-Flat."""

from lanekit.index.base import (
    CandidatePool,
    Dataset,
    Metric,
    SearchBudget,
    SearchError,
    SearchResult,
)
from lanekit.index.brute import BruteForceIndex, brute_force_topk
from lanekit.index.hnsw import HnswLiteIndex, hnsw_build
from lanekit.index.ivf import IvfFlatIndex, ivf_build
from lanekit.index.persist import IndexFormatError, load_index, save_index

IndexHandle = BruteForceIndex | HnswLiteIndex | IvfFlatIndex


def hnsw_search(idx: HnswLiteIndex, query, ef_search: int, k: int) -> SearchResult:
    return idx.search(query, ef_search, k)


def ivf_search_lists(idx: IvfFlatIndex, query, probe_lists, k: int) -> SearchResult:
    return idx.search_lists(query, probe_lists, k)


def enumerate_pool(idx: IndexHandle, query, K_pool: int) -> CandidatePool:
    return idx.enumerate_pool(query, K_pool)


def search(idx: IndexHandle, query, budget: SearchBudget, k: int) -> SearchResult:
    """Dispatch a budgeted search to the matching index family."""
    if budget.ef_search is not None:
        if not isinstance(idx, HnswLiteIndex):
            raise SearchError("ef_search budgets apply to HNSW indexes only")
        return idx.search(query, budget.ef_search, k)
    if budget.probe_lists is not None:
        if not isinstance(idx, IvfFlatIndex):
            raise SearchError("probe_lists budgets apply to IVF indexes only")
        return idx.search_lists(query, budget.probe_lists, k)
    return brute_force_topk(idx.dataset, query, budget.k if k is None else min(k, budget.k))


__all__ = [
    "BruteForceIndex",
    "CandidatePool",
    "Dataset",
    "HnswLiteIndex",
    "IndexFormatError",
    "IndexHandle",
    "IvfFlatIndex",
    "Metric",
    "SearchBudget",
    "SearchError",
    "SearchResult",
    "brute_force_topk",
    "enumerate_pool",
    "hnsw_build",
    "hnsw_search",
    "ivf_build",
    "ivf_search_lists",
    "load_index",
    "save_index",
    "search",
]

"""Overlap and retrieval-quality metrics."""

from __future__ import annotations

import csv
import logging
from dataclasses import dataclass, field
from typing import IO, Iterable, Sequence

import numpy as np

log = logging.getLogger(__name__)

CSV_COLUMNS = ("dataset", "index", "M", "k_lane", "alpha", "seed", "metric", "value")


class EmptyRelevanceError(ValueError):
    pass


def _as_set(s) -> set:
    if isinstance(s, np.ndarray):
        return set(s.tolist())
    return set(s)


def jaccard_overlap(lane_sets: Sequence[Iterable]) -> float:
    """``|intersection| / |union|`` over all lane result sets."""
    sets = [_as_set(s) for s in lane_sets]
    if not sets:
        raise ValueError("jaccard_overlap needs at least one set")
    union = set().union(*sets)
    if not union:
        raise ValueError("jaccard_overlap of empty sets is undefined")
    inter = set.intersection(*sets)
    return len(inter) / len(union)


def recall_at_k(result_ids, truth_ids, k: int) -> float:
    if k < 1:
        raise ValueError("k must be >= 1")
    truth = np.asarray(truth_ids)
    if truth.size < k:
        raise ValueError(f"ground truth has {truth.size} ids, need at least k={k}")
    gt = set(int(x) for x in truth[:k])
    got = set(int(x) for x in np.asarray(result_ids)[:k])
    return len(gt & got) / k


def _first_relevant_rank(result_ids, relevant, k: int) -> int | None:
    if k < 1:
        raise ValueError("k must be >= 1")
    rel = set(int(x) for x in relevant)
    if not rel:
        raise EmptyRelevanceError("query has no relevant ids")
    for rank, rid in enumerate(np.asarray(result_ids)[:k], start=1):
        if int(rid) in rel:
            return rank
    return None


def hit_at_k(result_ids, relevant, k: int) -> int:
    return int(_first_relevant_rank(result_ids, relevant, k) is not None)


def mrr_at_k(result_ids, relevant, k: int) -> float:
    rank = _first_relevant_rank(result_ids, relevant, k)
    return 0.0 if rank is None else 1.0 / rank


def mean_over_queries(fn, results: Sequence, relevant: Sequence, k: int) -> tuple[float, int]:
    """Average ``fn`` over queries in order, skipping queries with no relevant ids.

    Returns ``(mean, n_excluded)``.
    """
    vals = []
    excluded = 0
    for res, rel in zip(results, relevant):
        try:
            vals.append(fn(res, rel, k))
        except EmptyRelevanceError:
            excluded += 1
    if excluded:
        log.info("%d queries excluded from %s: empty relevance set", excluded, getattr(fn, "__name__", fn))
    return (float(np.mean(vals)) if vals else float("nan")), excluded


@dataclass
class OverlapStats:
    rho0: float
    rho0_std: float
    U0: float
    U0_std: float
    M: int
    k_lane: int
    per_query_rho0: np.ndarray = field(repr=False)
    per_query_U0: np.ndarray = field(repr=False)

    @property
    def k_total(self) -> int:
        return self.M * self.k_lane

    def U0_approx(self) -> float:
        return self.k_lane * (1.0 + (self.M - 1) * (1.0 - self.rho0))

    def to_dict(self) -> dict:
        return {
            "rho0": self.rho0,
            "rho0_std": self.rho0_std,
            "U0": self.U0,
            "U0_std": self.U0_std,
            "U0_approx": self.U0_approx(),
            "M": self.M,
            "k_lane": self.k_lane,
            "n_queries": int(self.per_query_rho0.size),
        }


def overlap_stats(lane_sets_per_query: Sequence[Sequence[Iterable[int]]], M: int, k_lane: int) -> OverlapStats:
    """Aggregate alpha=0 lane overlap and distinct coverage over queries."""
    rhos, unions = [], []
    for lane_sets in lane_sets_per_query:
        sets = [_as_set(s) for s in lane_sets]
        rhos.append(jaccard_overlap(sets))
        unions.append(len(set().union(*sets)))
    if not rhos:
        raise ValueError("need at least one query")
    r = np.asarray(rhos, dtype=np.float64)
    u = np.asarray(unions, dtype=np.float64)
    return OverlapStats(float(r.mean()), float(r.std()), float(u.mean()), float(u.std()), M, k_lane, r, u)


def measure_rho0(idx, queries, cfg, mode=None, global_seed: int = 0) -> OverlapStats:
    """Run every sample query through naive lanes and measure their overlap."""
    from lanekit.lanes import LaneMode, run_query
    from lanekit.prf import derive_query_seed

    queries = np.asarray(queries)
    if queries.ndim != 2 or queries.shape[0] < 1:
        raise ValueError("need at least one sample query")
    mode = mode or LaneMode.naive_identical()
    cfg0 = cfg.with_alpha(0.0)
    lane_sets = []
    for i, q in enumerate(queries):
        out = run_query(idx, q, cfg0.with_seed(derive_query_seed(global_seed, i)), mode, k=1)
        lane_sets.append([lr.selected for lr in out.per_lane])
    return overlap_stats(lane_sets, cfg.M, cfg.k_lane)


@dataclass
class QualityReport:
    metric: str
    per_seed: dict[int, float]

    @property
    def mean(self) -> float:
        return float(np.mean(list(self.per_seed.values())))

    @property
    def std(self) -> float:
        return float(np.std(list(self.per_seed.values())))

    def __str__(self) -> str:
        return f"{self.metric}: {self.mean:.3f} ± {self.std:.3f}"


@dataclass(frozen=True)
class MetricRow:
    dataset: str
    index: str
    M: int
    k_lane: int
    alpha: str  # formatted alpha, or "naive" / "single" for baselines
    seed: int
    metric: str
    value: float

    def as_list(self) -> list:
        return [self.dataset, self.index, self.M, self.k_lane, self.alpha, self.seed, self.metric, _fmt(self.value)]


def format_alpha(alpha) -> str:
    return alpha if isinstance(alpha, str) else f"{float(alpha):g}"


def _fmt(v: float) -> str:
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return repr(float(v))


def write_metrics_csv(fh: IO[str], rows: Iterable[MetricRow], header: bool = True) -> None:
    w = csv.writer(fh, lineterminator="\n")
    if header:
        w.writerow(CSV_COLUMNS)
    for row in rows:
        w.writerow(row.as_list())


def read_metrics_csv(fh: IO[str]) -> list[MetricRow]:
    r = csv.reader(fh)
    head = next(r)
    if tuple(head) != CSV_COLUMNS:
        raise ValueError(f"unexpected metrics CSV header {head}")
    return [
        MetricRow(d, i, int(m), int(k), a, int(s), met, float(v)) for d, i, m, k, a, s, met, v in r
    ]

"""In-process multi-lane execution: fan-out, partitioned lanes, merge and straggler policies.

Lanes only read shared, immutable state (index, pool, config). Running them
sequentially or on a thread pool gives identical outcomes.
"""

from __future__ import annotations

import dataclasses
import gc
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from lanekit.core import (
    ConfigError,
    CostCounters,
    HeterogeneousPartitionConfig,
    LaneResult,
    MergedResult,
    PartitionConfig,
)
from lanekit.index import BruteForceIndex, CandidatePool, HnswLiteIndex, IvfFlatIndex, Metric
from lanekit.metrics import jaccard_overlap
from lanekit.planner import alpha_partition, alpha_partition_heterogeneous
from lanekit.prf import derive_query_seed, hash_u64, permute_pool


@dataclass(frozen=True)
class LaneMode:
    kind: str  # "naive" | "jittered" | "partitioned"
    alpha: float | None = None

    @classmethod
    def naive_identical(cls) -> "LaneMode":
        return cls("naive")

    @classmethod
    def naive_jittered(cls) -> "LaneMode":
        return cls("jittered")

    @classmethod
    def partitioned(cls, alpha: float | None = None) -> "LaneMode":
        return cls("partitioned", alpha)

    @classmethod
    def parse(cls, text: str) -> "LaneMode":
        text = text.strip().lower()
        if text in {"naive", "naive_identical", "identical"}:
            return cls.naive_identical()
        if text in {"jittered", "naive_jittered", "jitter"}:
            return cls.naive_jittered()
        if text.startswith("partitioned"):
            inner = text[len("partitioned") :].strip("()= ")
            return cls.partitioned(float(inner) if inner else None)
        raise ValueError(f"unknown lane mode {text!r}")

    def __str__(self) -> str:
        if self.kind == "partitioned" and self.alpha is not None:
            return f"partitioned({self.alpha:g})"
        return self.kind


@dataclass(frozen=True)
class StragglerPolicy:
    kind: str  # "wait_all" | "first_k" | "time_boxed"
    k: int | None = None
    deadline: float | None = None
    delay_scale: float = 0.0  # mean of the injected exponential delay, seconds

    @classmethod
    def wait_all(cls, delay_scale: float = 0.0) -> "StragglerPolicy":
        return cls("wait_all", delay_scale=delay_scale)

    @classmethod
    def first_k_arrivals(cls, k: int, delay_scale: float = 0.0) -> "StragglerPolicy":
        return cls("first_k", k=k, delay_scale=delay_scale)

    @classmethod
    def time_boxed_backfill(cls, deadline: float, delay_scale: float = 0.0) -> "StragglerPolicy":
        return cls("time_boxed", deadline=deadline, delay_scale=delay_scale)

    @classmethod
    def from_dict(cls, doc: dict) -> "StragglerPolicy":
        kind = doc.get("kind", "wait_all")
        scale = float(doc.get("delay_scale", 0.0))
        if kind == "wait_all":
            return cls.wait_all(scale)
        if kind == "first_k":
            return cls.first_k_arrivals(int(doc["k"]), scale)
        if kind == "time_boxed":
            return cls.time_boxed_backfill(float(doc["deadline"]), scale)
        raise ValueError(f"unknown straggler policy {kind!r}")


def draw_delays(M: int, seed: int, scale: float) -> np.ndarray:
    """Seeded per-lane delays (exponential with mean ``scale``)."""
    if scale <= 0:
        return np.zeros(M)
    return np.random.default_rng(seed).exponential(scale, size=M)


@dataclass
class _Context:
    """What the coordinator may still touch after lanes return."""

    q64: np.ndarray
    metric: Metric
    rescore: Callable[[np.ndarray], np.ndarray]
    backfill: Callable[[set, int], tuple[np.ndarray, np.ndarray, CostCounters]] | None = None


@dataclass
class QueryOutcome:
    merged: MergedResult
    per_lane: list[LaneResult]
    lanes_counted: list[int]
    total_cost: CostCounters
    pool_cost: CostCounters
    mode: str
    alpha: float | None
    k: int
    delays: np.ndarray
    backfilled: np.ndarray = field(default_factory=lambda: np.empty(0, dtype=np.uint64))
    _ctx: _Context | None = field(default=None, repr=False)

    def to_record(self, query_id: int) -> dict:
        return {
            "query_id": int(query_id),
            "mode": self.mode,
            "alpha": self.alpha,
            "lanes": [[int(i) for i in lr.selected] for lr in self.per_lane],
            "lanes_counted": list(self.lanes_counted),
            "union_size": self.merged.union_size,
            "rho": self.merged.overlap_rho,
            "topk": self.merged.topk_ids,
            "backfilled": [int(i) for i in self.backfilled],
            "counters": self.total_cost.to_dict(),
            "lane_wall_times": [lr.wall_time for lr in self.per_lane],
            "delays": [float(x) for x in self.delays],
        }


def merge_lane_results(
    lanes: Sequence[LaneResult],
    k: int,
    metric: Metric = Metric.L2,
    extra: tuple[np.ndarray, np.ndarray] | None = None,
) -> MergedResult:
    """Deduplicate lane outputs and rank by ``(key, id)``.

    ``extra`` carries coordinator-side (backfilled) ids and keys; they join the
    union but not the overlap coefficient.
    """
    id_parts = [lr.selected for lr in lanes]
    key_parts = [lr.keys for lr in lanes]
    if extra is not None:
        id_parts.append(np.asarray(extra[0], dtype=np.uint64))
        key_parts.append(np.asarray(extra[1], dtype=np.float64))
    if id_parts:
        ids = np.concatenate(id_parts)
        keys = np.concatenate(key_parts)
    else:
        ids = np.empty(0, dtype=np.uint64)
        keys = np.empty(0, dtype=np.float64)
    uniq, first = np.unique(ids, return_index=True)
    ukeys = keys[first]
    order = np.lexsort((uniq, ukeys))[:k]
    scores = metric.key_to_score(ukeys[order])
    topk = [(int(i), float(s)) for i, s in zip(uniq[order], scores)]
    lane_sets = [lr.selected for lr in lanes if lr.selected.size]
    rho = jaccard_overlap(lane_sets) if lane_sets else float("nan")
    return MergedResult(frozenset(int(i) for i in uniq), topk, rho, int(uniq.size))


def _rank(ids: np.ndarray, keys: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    order = np.lexsort((ids, keys))
    return ids[order], keys[order]


def _run_lanes(fn: Callable[[int], LaneResult], M: int, threads: int) -> list[LaneResult]:
    if threads > 1 and M > 1:
        with ThreadPoolExecutor(max_workers=min(threads, M)) as ex:
            return list(ex.map(fn, range(M)))
    return [fn(r) for r in range(M)]


def _timed(fn: Callable[[int], LaneResult]) -> Callable[[int], LaneResult]:
    def wrapped(r: int) -> LaneResult:
        t0 = time.perf_counter()
        lr = fn(r)
        lr.wall_time = time.perf_counter() - t0
        return lr

    return wrapped


def split_budget(total: int, M: int) -> tuple[int, ...]:
    """Near-equal split; the first ``total % M`` lanes get one extra."""
    base, extra = divmod(total, M)
    return tuple(base + (1 if r < extra else 0) for r in range(M))


# -- partitioned lanes -------------------------------------------------------------------


def _partitioned_docs(idx, query, q64, cfg: PartitionConfig, pool: CandidatePool | None, threads, scan_backfill):
    ds = idx.dataset
    pool = pool if pool is not None else idx.enumerate_pool(query, cfg.K_pool)
    eff = cfg
    if len(pool) != cfg.K_pool:
        # IVF document pools cover whole lists and can overshoot K_pool
        eff = PartitionConfig(cfg.M, cfg.k_lane, cfg.alpha, len(pool), cfg.query_seed)
    t0 = time.perf_counter()
    permuted = permute_pool(pool.ids, eff.query_seed)
    assignments = [alpha_partition(permuted, eff, r, scan_backfill=scan_backfill) for r in range(eff.M)]
    planner_time = time.perf_counter() - t0

    def lane(r: int) -> LaneResult:
        ids = assignments[r].selected_ids
        keys = ds.keys_for(q64, ids.astype(np.int64))
        ids, keys = _rank(ids, keys)
        return LaneResult(r, ids, keys, CostCounters(vectors_scored=int(ids.size)))

    lanes = _run_lanes(_timed(lane), eff.M, threads)
    suffix = permuted[eff.shared_start :]

    def backfill(have: set, need: int):
        fresh = np.array([i for i in suffix if int(i) not in have][:need], dtype=np.uint64)
        keys = ds.keys_for(q64, fresh.astype(np.int64))
        return fresh, keys, CostCounters(vectors_scored=int(fresh.size))

    pool_cost = pool.cost + CostCounters(planner_time=planner_time)
    return lanes, pool_cost, backfill


def ivf_list_pool(idx: IvfFlatIndex, query, K_pool: int, M: int = 1) -> np.ndarray:
    """Nearest lists covering ``K_pool`` candidates, rounded up to a multiple of ``M``.

    The rounding gives every lane the same number of lists, so naive and
    partitioned runs probe the same total.
    """
    if idx.nlist < M:
        raise ConfigError(f"IVF list routing needs at least M={M} lists, index has {idx.nlist}")
    n = int(idx.lists_covering(query, K_pool).size)
    n = min(-(-n // M) * M, idx.nlist - idx.nlist % M)
    return idx.nearest_lists(query, n)


def _partitioned_ivf_lists(idx: IvfFlatIndex, query, q64, cfg: PartitionConfig, pool, threads):
    if pool is not None and pool.list_ids is not None and pool.list_ids.size % cfg.M == 0:
        lists = pool.list_ids
    else:
        lists = ivf_list_pool(idx, query, cfg.K_pool, cfg.M)
    t0 = time.perf_counter()
    permuted = permute_pool(lists.astype(np.uint64), cfg.query_seed)
    budgets = split_budget(int(permuted.size), cfg.M)
    hcfg = HeterogeneousPartitionConfig(budgets, cfg.alpha, int(permuted.size), cfg.query_seed)
    assignments = [alpha_partition_heterogeneous(permuted, hcfg, r) for r in range(cfg.M)]
    planner_time = time.perf_counter() - t0

    def lane(r: int) -> LaneResult:
        res = idx.search_lists(query, assignments[r].selected_ids.astype(np.int64), cfg.k_lane)
        return LaneResult(r, res.ids.astype(np.uint64), res.keys, res.cost)

    lanes = _run_lanes(_timed(lane), cfg.M, threads)
    suffix = permuted[hcfg.shared_start :].astype(np.int64)
    lane_lists = [set(int(x) for x in a.selected_ids) for a in assignments]

    def backfill(have: set, need: int, counted: Sequence[int] = ()):
        scanned = set().union(*(lane_lists[r] for r in counted)) if counted else set()
        todo = [int(l) for l in suffix if int(l) not in scanned]
        if not todo or need <= 0:
            return np.empty(0, dtype=np.uint64), np.empty(0), CostCounters()
        res = idx.search_lists(query, todo, idx.dataset.N)
        keep = [j for j, i in enumerate(res.ids) if int(i) not in have][:need]
        return res.ids[keep].astype(np.uint64), res.keys[keep], res.cost

    return lanes, CostCounters(planner_time=planner_time), backfill


# -- naive lanes -----------------------------------------------------------------------


def _naive(idx, query, q64, cfg: PartitionConfig, jittered: bool, threads):
    if jittered and not isinstance(idx, HnswLiteIndex):
        raise ValueError("jittered-entry lanes are defined for HNSW indexes only")
    if isinstance(idx, IvfFlatIndex):
        # each lane probes its equal share of the list pool, nearest first
        probe = ivf_list_pool(idx, query, cfg.K_pool, cfg.M)
        probe = probe[: probe.size // cfg.M]

    def lane(r: int) -> LaneResult:
        if isinstance(idx, HnswLiteIndex):
            start = -1
            if jittered:
                start = int(hash_u64((cfg.query_seed + r + 1) & 0xFFFFFFFFFFFFFFFF) % idx.dataset.N)
            res = idx.search(query, cfg.k_lane, cfg.k_lane, start_node=start)
        elif isinstance(idx, IvfFlatIndex):
            res = idx.search_lists(query, probe, cfg.k_lane)
        else:
            res = idx.search(query, cfg.k_lane)
        return LaneResult(r, res.ids.astype(np.uint64), res.keys, res.cost)

    return _run_lanes(_timed(lane), cfg.M, threads)


# -- entry points ----------------------------------------------------------------------


def run_query(
    idx,
    query,
    cfg: PartitionConfig,
    mode: LaneMode | None = None,
    policy: StragglerPolicy | None = None,
    k: int = 10,
    *,
    delays=None,
    pool: CandidatePool | None = None,
    threads: int = 1,
    ivf_routing: str = "lists",
    scan_backfill: bool = False,
) -> QueryOutcome:
    """Execute one query across ``cfg.M`` lanes and merge.

    Partitioned mode enumerates one pool, PRF-orders it and hands each lane its
    slice; HNSW/brute-force lanes rescore their ids exactly, IVF lanes scan
    their list slice (or rescore document slices with ``ivf_routing="docs"``).
    Naive modes issue ``M`` independent searches of budget ``k_lane``.
    """
    mode = mode or LaneMode.partitioned()
    policy = policy or StragglerPolicy.wait_all()
    if not 1 <= k <= cfg.k_total:
        raise ConfigError(f"k={k} must lie in [1, k_total={cfg.k_total}]")
    if ivf_routing not in {"lists", "docs"}:
        raise ValueError(f"ivf_routing must be 'lists' or 'docs', got {ivf_routing!r}")
    ds = idx.dataset
    q64 = ds.as_query(query)
    backfill = None
    if mode.kind == "partitioned":
        if mode.alpha is not None and mode.alpha != cfg.alpha:
            cfg = cfg.with_alpha(mode.alpha)
        if isinstance(idx, IvfFlatIndex) and ivf_routing == "lists":
            lanes, pool_cost, backfill = _partitioned_ivf_lists(idx, query, q64, cfg, pool, threads)
        else:
            lanes, pool_cost, backfill = _partitioned_docs(idx, query, q64, cfg, pool, threads, scan_backfill)
        alpha = cfg.alpha
    elif mode.kind in {"naive", "jittered"}:
        lanes = _naive(idx, query, q64, cfg, mode.kind == "jittered", threads)
        pool_cost = CostCounters()
        alpha = 0.0
    else:
        raise ValueError(f"unknown lane mode {mode.kind!r}")

    if delays is None:
        delays = draw_delays(cfg.M, cfg.query_seed, policy.delay_scale)
    ctx = _Context(q64, ds.metric, lambda ids: ds.keys_for(q64, ids), backfill)
    outcome = QueryOutcome(
        merged=merge_lane_results(lanes, k, ds.metric),
        per_lane=lanes,
        lanes_counted=list(range(cfg.M)),
        total_cost=pool_cost + CostCounters.total([lr.cost for lr in lanes]),
        pool_cost=pool_cost,
        mode=str(mode),
        alpha=alpha,
        k=k,
        delays=np.zeros(cfg.M),
        _ctx=ctx,
    )
    return simulate_stragglers(outcome, policy, delays)


def simulate_stragglers(outcome: QueryOutcome, policy: StragglerPolicy, injected_delays) -> QueryOutcome:
    """Decide which lanes count toward the merge under ``policy``.

    Arrival order is by ``(delay, lane_id)``. All lanes' work stays in the
    cost counters; only the merge is restricted.
    """
    M = len(outcome.per_lane)
    delays = np.asarray(injected_delays, dtype=np.float64)
    if delays.shape != (M,):
        raise ValueError(f"need {M} delays, got shape {delays.shape}")
    if (delays < 0).any() or not np.isfinite(delays).all():
        raise ValueError("delays must be finite and non-negative")
    arrival = sorted(range(M), key=lambda r: (delays[r], r))
    by_id = {lr.lane_id: lr for lr in outcome.per_lane}
    ctx = outcome._ctx
    metric = ctx.metric if ctx is not None else Metric.L2

    extra = None
    extra_cost = CostCounters()
    if policy.kind == "wait_all":
        counted = sorted(range(M))
    elif policy.kind == "first_k":
        target = policy.k if policy.k is not None else outcome.k
        seen: set[int] = set()
        counted = []
        for r in arrival:
            counted.append(r)
            seen.update(int(i) for i in by_id[r].selected)
            if len(seen) >= target:
                break
        counted.sort()
    elif policy.kind == "time_boxed":
        if policy.deadline is None:
            raise ValueError("time-boxed backfill needs a deadline")
        counted = sorted(r for r in range(M) if delays[r] <= policy.deadline)
        have = set()
        for r in counted:
            have.update(int(i) for i in by_id[r].selected)
        need = outcome.k - len(have)
        if need > 0 and ctx is not None and ctx.backfill is not None:
            try:
                ids, keys, extra_cost = ctx.backfill(have, need, counted)
            except TypeError:
                ids, keys, extra_cost = ctx.backfill(have, need)
            if ids.size:
                extra = (ids, keys)
    else:
        raise ValueError(f"unknown straggler policy {policy.kind!r}")

    lanes = [by_id[r] for r in counted]
    merged = merge_lane_results(lanes, outcome.k, metric, extra)
    return dataclasses.replace(
        outcome,
        merged=merged,
        lanes_counted=counted,
        delays=delays,
        backfilled=extra[0] if extra is not None else np.empty(0, dtype=np.uint64),
        total_cost=outcome.pool_cost + CostCounters.total([lr.cost for lr in outcome.per_lane]) + extra_cost,
    )


def run_single_baseline(idx, query, k_total: int, k: int, *, M: int | None = None) -> QueryOutcome:
    """One search with the whole budget: the equal-cost ceiling.

    For IVF, passing the lane count ``M`` probes the same rounded list pool the
    lanes split, instead of the bare covering prefix.
    """
    if not 1 <= k <= k_total:
        raise ConfigError(f"k={k} must lie in [1, k_total={k_total}]")
    ds = idx.dataset
    t0 = time.perf_counter()
    if isinstance(idx, IvfFlatIndex) and M is not None:
        res = idx.search_lists(query, ivf_list_pool(idx, query, k_total, M), k_total)
    else:
        res = idx.single_search(query, k_total, k_total)
    lane = LaneResult(0, res.ids.astype(np.uint64), res.keys, res.cost, time.perf_counter() - t0)
    merged = merge_lane_results([lane], k, ds.metric)
    return QueryOutcome(
        merged=merged,
        per_lane=[lane],
        lanes_counted=[0],
        total_cost=res.cost,
        pool_cost=CostCounters(),
        mode="single",
        alpha=None,
        k=k,
        delays=np.zeros(1),
    )


# -- planner microbenchmark ---------------------------------------------------------


@dataclass
class MicrobenchRow:
    k_total: int
    M: int
    trials: int
    mean_us: float
    p50_us: float
    p95_us: float


@dataclass
class MicrobenchReport:
    rows: list[MicrobenchRow]
    slope_us_per_candidate: float
    intercept_us: float
    r2: float

    def doubling_ratios(self) -> list[float]:
        out = []
        by_k = {r.k_total: r.mean_us for r in self.rows}
        for r in self.rows:
            if 2 * r.k_total in by_k:
                out.append(by_k[2 * r.k_total] / r.mean_us)
        return out


def _linear_fit(x: np.ndarray, y: np.ndarray) -> tuple[float, float, float]:
    slope, intercept = np.polyfit(x, y, 1)
    pred = slope * x + intercept
    ss_res = float(((y - pred) ** 2).sum())
    ss_tot = float(((y - y.mean()) ** 2).sum())
    r2 = 1.0 - ss_res / ss_tot if ss_tot > 0 else 1.0
    return float(slope), float(intercept), r2


def planner_microbenchmark(
    k_totals: Sequence[int] = (16, 32, 64, 128, 256),
    M: int = 4,
    trials: int = 10_000,
    seed: int = 0,
    k: int = 10,
    warmup: int = 500,
) -> MicrobenchReport:
    """Time PRF permutation + M lane slices + merge per query, at alpha=1.

    Lane rescoring is replaced by a table lookup so only planner work is timed.
    """
    rng = np.random.default_rng(seed)
    universe = 1 << 20
    score_table = rng.random(universe)
    for k_total in k_totals:
        if k_total % M:
            raise ConfigError(f"k_total={k_total} is not a multiple of M={M}")
    cfgs = [PartitionConfig(M, k_total // M, 1.0, k_total) for k_total in k_totals]
    pools = [
        [rng.choice(universe, size=k_total, replace=False).astype(np.uint64) for _ in range(64)]
        for k_total in k_totals
    ]
    samples = np.empty((len(k_totals), trials))

    def one(j: int, t: int) -> float:
        cfg = cfgs[j]
        pool = pools[j][t % 64]
        qseed = derive_query_seed(seed, t & 0xFFFFFFFF)
        t0 = time.perf_counter()
        permuted = permute_pool(pool, qseed)
        lanes = []
        for r in range(M):
            ids = alpha_partition(permuted, cfg, r).selected_ids
            lanes.append(LaneResult(r, ids, score_table[ids.astype(np.int64)]))
        merge_lane_results(lanes, k)
        return (time.perf_counter() - t0) * 1e6

    # sizes are interleaved per trial so clock drift and background load hit all of them alike
    gc_was_enabled = gc.isenabled()
    gc.disable()
    try:
        for t in range(-warmup, trials):
            for j in range(len(k_totals)):
                dt = one(j, t)
                if t >= 0:
                    samples[j, t] = dt
    finally:
        if gc_was_enabled:
            gc.enable()
    rows = [
        MicrobenchRow(
            k_total, M, trials, float(s.mean()), float(np.percentile(s, 50)), float(np.percentile(s, 95))
        )
        for k_total, s in zip(k_totals, samples)
    ]
    x = np.array([r.k_total for r in rows], dtype=np.float64)
    y = np.array([r.mean_us for r in rows])
    slope, intercept, r2 = _linear_fit(x, y) if len(rows) >= 2 else (float("nan"), float("nan"), float("nan"))
    return MicrobenchReport(rows, slope, intercept, r2)


__all__ = [
    "BruteForceIndex",
    "LaneMode",
    "MicrobenchReport",
    "QueryOutcome",
    "StragglerPolicy",
    "draw_delays",
    "ivf_list_pool",
    "merge_lane_results",
    "planner_microbenchmark",
    "run_query",
    "run_single_baseline",
    "simulate_stragglers",
    "split_budget",
]

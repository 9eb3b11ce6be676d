"""Experiment grid: alpha sweep, pool-size ablation, lane scaling, overlap measurement."""

from __future__ import annotations

import csv
import json
import logging
import math
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import IO, Any

import numpy as np

from lanekit.core import ConfigError, PartitionConfig
from lanekit.datasets import (
    Benchmark,
    MINI_SIFT,
    data_root,
    generate_synthetic,
    load_benchmark,
    load_sift1m,
)
from lanekit.index import BruteForceIndex, IvfFlatIndex, hnsw_build, ivf_build, load_index
from lanekit.index.persist import read_header
from lanekit.lanes import (
    LaneMode,
    StragglerPolicy,
    draw_delays,
    run_query,
    run_single_baseline,
)
from lanekit.metrics import (
    MetricRow,
    format_alpha,
    hit_at_k,
    measure_rho0,
    mrr_at_k,
    recall_at_k,
)
from lanekit.planner import max_feasible_alpha, predicted_gain, recommend_alpha
from lanekit.prf import derive_query_seed

log = logging.getLogger(__name__)

SWEEP_ALPHAS = (0.0, 0.25, 0.5, 0.75, 1.0)
POOL_RATIOS = (0.8, 0.9, 1.0, 1.1, 1.25, 1.5)
SEEDS = (42, 123, 789)
POOLSIZE_COLUMNS = (
    "dataset", "index", "M", "k_lane", "alpha", "seed", "pool_ratio", "K_pool",
    "recall@10", "union_size", "union_min", "union_max", "predicted",
)


@dataclass
class ExperimentManifest:
    dataset: str = "mini-sift"
    index: str = "hnsw"
    index_params: dict = field(default_factory=dict)
    M: list[int] = field(default_factory=lambda: [4])
    k_lane: int = 16
    alphas: list[float] = field(default_factory=lambda: list(SWEEP_ALPHAS))
    pool_ratios: list[float] = field(default_factory=lambda: list(POOL_RATIOS))
    seeds: list[int] = field(default_factory=lambda: list(SEEDS))
    modes: list[str] = field(default_factory=lambda: ["naive"])
    policy: dict = field(default_factory=lambda: {"kind": "wait_all"})
    k: int = 10
    n_queries: int | None = None
    ivf_routing: str = "lists"
    out: str = "results"

    def __post_init__(self) -> None:
        if self.index not in {"hnsw", "ivf", "brute"}:
            raise ConfigError(f"unknown index family {self.index!r}")
        if not self.M or not self.seeds:
            raise ConfigError("M and seeds must be non-empty")
        for m in self.modes:
            LaneMode.parse(m)
        StragglerPolicy.from_dict(self.policy)
        if self.k > self.k_lane * min(self.M):
            raise ConfigError(f"k={self.k} exceeds the smallest k_total")

    def expand(self) -> list[tuple[int, int, PartitionConfig]]:
        """Every ``(M, seed, cfg)`` cell of the sweep at ``K_pool = k_total``."""
        cells = []
        for M in self.M:
            for alpha in self.alphas:
                cfg = PartitionConfig(M, self.k_lane, alpha, M * self.k_lane)
                for seed in self.seeds:
                    cells.append((M, seed, cfg))
        return cells

    @property
    def policy_obj(self) -> StragglerPolicy:
        return StragglerPolicy.from_dict(self.policy)

    @classmethod
    def from_dict(cls, doc: dict[str, Any]) -> "ExperimentManifest":
        known = set(cls.__dataclass_fields__)
        unknown = set(doc) - known
        if unknown:
            raise ConfigError(f"unknown manifest keys: {sorted(unknown)}")
        return cls(**doc)

    @classmethod
    def load(cls, path) -> "ExperimentManifest":
        return cls.from_dict(json.loads(Path(path).read_text()))

    def to_dict(self) -> dict:
        return asdict(self)


# -- datasets and indexes ------------------------------------------------------------


def resolve_benchmark(name: str = "mini-sift", paper_scale: bool = False, threads: int = 1) -> Benchmark:
    """Find a benchmark by name or path; SIFT1M only when its files are present."""
    root = data_root()
    if paper_scale:
        sift = root / "sift1m"
        if (sift / "sift_base.fvecs").exists():
            return load_sift1m(sift, threads)
        log.warning("SIFT1M files not found under %s; falling back to mini-sift", sift)
        name = "mini-sift"
    p = Path(name)
    if (p / "benchmark.json").exists() or (p.suffix == ".json" and p.exists()):
        return load_benchmark(p)
    if (root / name / "benchmark.json").exists():
        return load_benchmark(root / name)
    if name == "mini-sift":
        bench = generate_synthetic(MINI_SIFT, threads=threads)
        bench.name = "mini-sift"
        return bench
    raise FileNotFoundError(f"no benchmark named {name!r} (looked in {p} and {root / name})")


def default_index_params(family: str, N: int) -> dict:
    if family == "hnsw":
        return {"graph_degree": 16, "ef_construction": 100}
    if family == "ivf":
        return {"nlist": min(128, N), "train_sample_size": min(16384, N)}
    return {}


def build_index(bench: Benchmark, family: str, params: dict | None, seed: int):
    params = {**default_index_params(family, bench.base.N), **(params or {})}
    if family == "hnsw":
        return hnsw_build(bench.base, seed=seed, **params)
    if family == "ivf":
        return ivf_build(bench.base, seed=seed, **params)
    if family == "brute":
        return BruteForceIndex(bench.base)
    raise ConfigError(f"unknown index family {family!r}")


class IndexCache:
    """Per-seed indexes, loaded from ``index_dir`` when a matching file exists."""

    def __init__(self, bench: Benchmark, family: str, params: dict | None = None, index_dir=None):
        self.bench = bench
        self.family = family
        self.params = params or {}
        self.index_dir = Path(index_dir) if index_dir else None
        self._cache: dict[int, Any] = {}

    def path_for(self, seed: int) -> Path | None:
        if self.index_dir is None:
            return None
        return self.index_dir / f"{self.bench.name}-{self.family}-seed{seed}.lkx"

    def get(self, seed: int):
        if seed in self._cache:
            return self._cache[seed]
        idx = None
        path = self.path_for(seed)
        if path is not None and path.exists():
            head = read_header(path)
            if head.get("family") == self.family and head.get("seed") == seed and head.get("N") == self.bench.base.N:
                cand = load_index(path)
                if np.array_equal(cand.dataset.vectors, self.bench.base.vectors):
                    idx = cand
                else:
                    log.warning("index %s was built on different vectors; rebuilding", path)
        if idx is None:
            idx = build_index(self.bench, self.family, self.params, seed)
        self._cache[seed] = idx
        return idx


def _query_slice(bench: Benchmark, n_queries: int | None) -> range:
    n = bench.n_queries if n_queries is None else min(n_queries, bench.n_queries)
    return range(n)


# -- per-query scoring ---------------------------------------------------------------


@dataclass
class CellStats:
    """Per-query measurements for one (seed, alpha-or-baseline) cell."""

    recall: list[float] = field(default_factory=list)
    hit: list[int] = field(default_factory=list)
    mrr: list[float] = field(default_factory=list)
    rho: list[float] = field(default_factory=list)
    union: list[int] = field(default_factory=list)
    node_visits: list[int] = field(default_factory=list)
    list_scans: list[int] = field(default_factory=list)
    pool_node_visits: list[int] = field(default_factory=list)

    def add(self, out, truth, relevant, k: int) -> float:
        ids = out.merged.topk_ids
        r = recall_at_k(ids, truth, k)
        self.recall.append(r)
        if relevant is not None and len(relevant):
            self.hit.append(hit_at_k(ids, relevant, k))
            self.mrr.append(mrr_at_k(ids, relevant, k))
        self.rho.append(out.merged.overlap_rho)
        self.union.append(out.merged.union_size)
        self.node_visits.append(out.total_cost.node_visits)
        self.list_scans.append(out.total_cost.list_scans)
        self.pool_node_visits.append(out.pool_cost.node_visits)
        return r

    def summary(self, k: int) -> dict[str, float]:
        out = {
            f"recall@{k}": float(np.mean(self.recall)),
            "overlap": float(np.nanmean(self.rho)) if self.rho else float("nan"),
            "union_size": float(np.mean(self.union)),
            "node_visits": float(np.mean(self.node_visits)),
            "list_scans": float(np.mean(self.list_scans)),
        }
        if self.hit:
            out[f"hit@{k}"] = float(np.mean(self.hit))
            out[f"mrr@{k}"] = float(np.mean(self.mrr))
        return out


@dataclass
class SweepResult:
    rows: list[MetricRow]
    cells: dict[tuple[int, int, str], CellStats]  # (M, seed, alpha label) -> stats
    skipped: list[str] = field(default_factory=list)

    def recall(self, M: int, seed: int, alpha) -> float:
        return float(np.mean(self.cells[(M, seed, format_alpha(alpha))].recall))

    def per_query_recall(self, M: int, seed: int, alpha) -> np.ndarray:
        return np.asarray(self.cells[(M, seed, format_alpha(alpha))].recall)


def _rows_for(stats: CellStats, dataset, index, M, k_lane, alpha, seed, k) -> list[MetricRow]:
    return [
        MetricRow(dataset, index, M, k_lane, format_alpha(alpha), seed, name, value)
        for name, value in stats.summary(k).items()
    ]


def _write_log(log_fh: IO[str] | None, out, qi: int, seed: int, recall: float) -> None:
    if log_fh is None:
        return
    rec = out.to_record(qi)
    rec["seed"] = seed
    rec["recall"] = recall
    log_fh.write(json.dumps(rec) + "\n")


def run_sweep(
    manifest: ExperimentManifest,
    bench: Benchmark,
    indexes: IndexCache | None = None,
    *,
    threads: int = 1,
    log_fh: IO[str] | None = None,
    include_baselines: bool = True,
) -> SweepResult:
    """Alpha sweep for every M and seed, plus naive and single-index baselines.

    Each query enumerates one pool of ``k_total`` candidates and reuses it for
    every alpha, so sweep points differ only in how that pool is split.
    """
    indexes = indexes or IndexCache(bench, manifest.index, manifest.index_params)
    policy = manifest.policy_obj
    k = manifest.k
    rows: list[MetricRow] = []
    cells: dict[tuple[int, int, str], CellStats] = {}
    skipped: list[str] = []
    queries = _query_slice(bench, manifest.n_queries)
    for M in manifest.M:
        k_total = M * manifest.k_lane
        alphas = []
        for a in manifest.alphas:
            try:
                PartitionConfig(M, manifest.k_lane, a, k_total)
                alphas.append(a)
            except ConfigError as exc:
                skipped.append(f"M={M} alpha={a}: {exc}")
                log.warning("skipping M=%d alpha=%s: %s", M, a, exc)
        for seed in manifest.seeds:
            idx = indexes.get(seed)
            stats = {format_alpha(a): CellStats() for a in alphas}
            baselines = {m: CellStats() for m in manifest.modes} if include_baselines else {}
            single = CellStats()
            for qi in queries:
                q = bench.queries[qi]
                truth = bench.ground_truth[qi]
                rel = bench.relevance[qi] if bench.relevance else None
                base_cfg = PartitionConfig(M, manifest.k_lane, 1.0, k_total, derive_query_seed(seed, qi))
                delays = draw_delays(M, base_cfg.query_seed, policy.delay_scale)
                pool = None
                if not isinstance(idx, IvfFlatIndex) or manifest.ivf_routing == "docs":
                    pool = idx.enumerate_pool(q, k_total)
                for a in alphas:
                    out = run_query(
                        idx, q, base_cfg.with_alpha(a), LaneMode.partitioned(), policy, k,
                        delays=delays, pool=pool, threads=threads, ivf_routing=manifest.ivf_routing,
                    )
                    r = stats[format_alpha(a)].add(out, truth, rel, k)
                    _write_log(log_fh, out, qi, seed, r)
                for m in baselines:
                    out = run_query(idx, q, base_cfg, LaneMode.parse(m), policy, k, delays=delays, threads=threads)
                    r = baselines[m].add(out, truth, rel, k)
                    _write_log(log_fh, out, qi, seed, r)
                if include_baselines:
                    out = run_single_baseline(idx, q, k_total, k, M=M)
                    r = single.add(out, truth, rel, k)
                    _write_log(log_fh, out, qi, seed, r)
            for label, st in stats.items():
                cells[(M, seed, label)] = st
                rows += _rows_for(st, bench.name, manifest.index, M, manifest.k_lane, label, seed, k)
            for m, st in baselines.items():
                label = "naive" if LaneMode.parse(m).kind == "naive" else str(LaneMode.parse(m))
                cells[(M, seed, label)] = st
                rows += _rows_for(st, bench.name, manifest.index, M, manifest.k_lane, label, seed, k)
                # predicted vs measured coverage gain at alpha=1 against this baseline
                if format_alpha(1.0) in stats:
                    rho0 = float(np.mean(st.rho))
                    measured = float(np.mean(stats[format_alpha(1.0)].union)) / float(np.mean(st.union))
                    rows.append(MetricRow(bench.name, manifest.index, M, manifest.k_lane, label, seed,
                                          "gain_predicted", predicted_gain(min(max(rho0, 0.0), 1.0), M)))
                    rows.append(MetricRow(bench.name, manifest.index, M, manifest.k_lane, label, seed,
                                          "gain_measured", measured))
            if include_baselines:
                cells[(M, seed, "single")] = single
                rows += _rows_for(single, bench.name, manifest.index, M, manifest.k_lane, "single", seed, k)
    return SweepResult(rows, cells, skipped)


# -- pool-size ablation ---------------------------------------------------------------


@dataclass
class PoolsizeRow:
    dataset: str
    index: str
    M: int
    k_lane: int
    alpha: float
    seed: int
    pool_ratio: float
    K_pool: int
    recall: float
    union_size: float
    union_min: int
    union_max: int
    predicted: float

    def as_list(self) -> list:
        return [
            self.dataset, self.index, self.M, self.k_lane, f"{self.alpha:g}", self.seed,
            f"{self.pool_ratio:g}", self.K_pool, repr(self.recall), repr(self.union_size),
            self.union_min, self.union_max, repr(self.predicted),
        ]


def pool_size_for(ratio: float, k_total: int) -> int:
    # ceil with a guard so 1.1 * 64 = 70.4 -> 71 but 1.0 * 64 stays 64
    return int(math.ceil(ratio * k_total - 1e-9))


def run_poolsize(
    manifest: ExperimentManifest,
    bench: Benchmark,
    indexes: IndexCache | None = None,
    *,
    threads: int = 1,
) -> tuple[list[PoolsizeRow], list[str]]:
    """Recall at alpha=1 (or the largest feasible alpha) for each pool ratio."""
    indexes = indexes or IndexCache(bench, manifest.index, manifest.index_params)
    queries = _query_slice(bench, manifest.n_queries)
    routing = "docs" if manifest.index == "ivf" else manifest.ivf_routing
    rows, skipped = [], []
    for M in manifest.M:
        k_total = M * manifest.k_lane
        for ratio in manifest.pool_ratios:
            K_pool = pool_size_for(ratio, k_total)
            alpha = 1.0 if K_pool >= k_total else max_feasible_alpha(M, manifest.k_lane, K_pool)
            if alpha is None:
                msg = f"M={M} ratio={ratio}: K_pool={K_pool} < k_lane, no feasible alpha"
                skipped.append(msg)
                log.warning("skipping %s", msg)
                continue
            for seed in manifest.seeds:
                idx = indexes.get(seed)
                rec, uni = [], []
                for qi in queries:
                    cfg = PartitionConfig(M, manifest.k_lane, alpha, K_pool, derive_query_seed(seed, qi))
                    out = run_query(idx, bench.queries[qi], cfg, k=manifest.k, threads=threads, ivf_routing=routing)
                    rec.append(recall_at_k(out.merged.topk_ids, bench.ground_truth[qi], manifest.k))
                    uni.append(out.merged.union_size)
                rows.append(PoolsizeRow(
                    bench.name, manifest.index, M, manifest.k_lane, alpha, seed, ratio, K_pool,
                    float(np.mean(rec)), float(np.mean(uni)), int(min(uni)), int(max(uni)),
                    min(k_total / K_pool, 1.0),
                ))
    return rows, skipped


def write_poolsize_csv(fh: IO[str], rows: list[PoolsizeRow]) -> None:
    w = csv.writer(fh, lineterminator="\n")
    w.writerow(POOLSIZE_COLUMNS)
    for r in rows:
        w.writerow(r.as_list())


# -- lane scaling -------------------------------------------------------------------


def run_lanescale(
    manifest: ExperimentManifest,
    bench: Benchmark,
    indexes: IndexCache | None = None,
    *,
    threads: int = 1,
    log_fh: IO[str] | None = None,
) -> SweepResult:
    """alpha in {0, 1} plus baselines for each M, with k_total = M * k_lane."""
    scaled = ExperimentManifest(**{**manifest.to_dict(), "alphas": [0.0, 1.0]})
    return run_sweep(scaled, bench, indexes, threads=threads, log_fh=log_fh)


# -- overlap measurement and alpha recommendation ------------------------------------------


@dataclass
class Recommendation:
    stats: dict
    alpha: float
    gain: float

    def to_dict(self) -> dict:
        return {"overlap": self.stats, "recommended_alpha": self.alpha, "predicted_gain": self.gain}


def recommend(idx, queries, M: int, k_lane: int, mode: LaneMode | None = None, seed: int = 0) -> Recommendation:
    cfg = PartitionConfig(M, k_lane, 0.0, M * k_lane)
    stats = measure_rho0(idx, queries, cfg, mode, seed)
    rho0 = min(max(stats.rho0, 0.0), 1.0)
    return Recommendation(stats.to_dict(), recommend_alpha(rho0), predicted_gain(rho0, M))

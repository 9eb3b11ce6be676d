"""Synthetic benchmarks, texmex vector files and ground truth."""

from __future__ import annotations

import hashlib
import json
import logging
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from lanekit.index import Dataset, Metric, brute_force_topk

log = logging.getLogger(__name__)

GT_DEPTH = 100


class VecsFormatError(ValueError):
    pass


# -- fvecs / ivecs / bvecs ---------------------------------------------------------

_ELEM = {"fvecs": np.dtype("<f4"), "ivecs": np.dtype("<i4"), "bvecs": np.dtype("u1")}


def _read_vecs(path: str | Path, kind: str) -> np.ndarray:
    elem = _ELEM[kind]
    raw = Path(path).read_bytes()
    if not raw:
        return np.empty((0, 0), dtype=elem.newbyteorder("="))
    if len(raw) < 4:
        raise VecsFormatError(f"{path}: truncated record at byte offset 0")
    d = int(np.frombuffer(raw, dtype="<i4", count=1)[0])
    if d <= 0:
        raise VecsFormatError(f"{path}: non-positive dimension {d} at byte offset 0")
    rec = 4 + d * elem.itemsize
    if len(raw) % rec == 0:
        n = len(raw) // rec
        rows = np.frombuffer(raw, dtype=np.uint8).reshape(n, rec)
        dims = rows[:, :4].copy().view("<i4").ravel()
        if (dims == d).all():
            body = np.ascontiguousarray(rows[:, 4:]).view(elem).reshape(n, d)
            return body.astype(elem.newbyteorder("="))
    _locate_bad_record(raw, d, elem.itemsize, path)
    raise AssertionError("unreachable")  # pragma: no cover


def _locate_bad_record(raw: bytes, d: int, itemsize: int, path) -> None:
    off = 0
    idx = 0
    while off < len(raw):
        if off + 4 > len(raw):
            raise VecsFormatError(f"{path}: truncated dimension prefix of record {idx} at byte offset {off}")
        dim = int.from_bytes(raw[off : off + 4], "little", signed=True)
        if dim <= 0:
            raise VecsFormatError(f"{path}: non-positive dimension {dim} in record {idx} at byte offset {off}")
        if dim != d:
            raise VecsFormatError(
                f"{path}: record {idx} at byte offset {off} has dimension {dim}, expected {d}"
            )
        end = off + 4 + dim * itemsize
        if end > len(raw):
            raise VecsFormatError(f"{path}: truncated record {idx} at byte offset {off}")
        off = end
        idx += 1


def _write_vecs(path: str | Path, X, kind: str) -> Path:
    elem = _ELEM[kind]
    X = np.asarray(X)
    if X.ndim != 2 or X.shape[1] < 1:
        raise ValueError(f"expected an N x d matrix with d >= 1, got shape {X.shape}")
    n, d = X.shape
    body = np.ascontiguousarray(X.astype(elem))
    rows = np.empty((n, 4 + d * elem.itemsize), dtype=np.uint8)
    rows[:, :4] = np.frombuffer(np.int32(d).astype("<i4").tobytes(), dtype=np.uint8)
    rows[:, 4:] = body.view(np.uint8).reshape(n, -1)
    path = Path(path)
    path.write_bytes(rows.tobytes())
    return path


def load_fvecs(path) -> np.ndarray:
    return _read_vecs(path, "fvecs")


def load_ivecs(path) -> np.ndarray:
    return _read_vecs(path, "ivecs")


def load_bvecs(path) -> np.ndarray:
    return _read_vecs(path, "bvecs")


def write_fvecs(path, X) -> Path:
    return _write_vecs(path, X, "fvecs")


def write_ivecs(path, X) -> Path:
    return _write_vecs(path, X, "ivecs")


def write_bvecs(path, X) -> Path:
    return _write_vecs(path, X, "bvecs")


def checksum(arr: np.ndarray) -> str:
    a = np.ascontiguousarray(arr)
    h = hashlib.sha256()
    h.update(f"{a.dtype.str}:{a.shape}".encode())
    h.update(a.tobytes())
    return h.hexdigest()


def file_checksum(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


# -- ground truth ------------------------------------------------------------------


def build_ground_truth(base: Dataset, queries: np.ndarray, depth: int = GT_DEPTH, threads: int = 1) -> np.ndarray:
    """Exact top-``depth`` ids per query (int32, row order = query order)."""
    if depth > base.N:
        raise ValueError(f"depth={depth} exceeds N={base.N}")
    queries = np.asarray(queries, dtype=np.float32)

    def one(i: int) -> np.ndarray:
        return brute_force_topk(base, queries[i], depth).ids

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            rows = list(pool.map(one, range(queries.shape[0])))
    else:
        rows = [one(i) for i in range(queries.shape[0])]
    if not rows:
        return np.empty((0, depth), dtype=np.int32)
    return np.vstack(rows).astype(np.int32)


def cached_ground_truth(base: Dataset, queries: np.ndarray, path, depth: int = GT_DEPTH, threads: int = 1) -> np.ndarray:
    """Ground truth backed by an ivecs cache plus a checksum sidecar.

    The cache is reused only while base checksum, query checksum and depth all
    match the sidecar; otherwise it is rebuilt.
    """
    path = Path(path)
    meta_path = path.with_name(path.name + ".meta.json")
    want = {"base_sha256": checksum(base.vectors), "query_sha256": checksum(np.asarray(queries, np.float32)), "depth": depth}
    if path.exists() and meta_path.exists():
        try:
            have = json.loads(meta_path.read_text())
        except json.JSONDecodeError:
            have = {}
        if all(have.get(k) == v for k, v in want.items()):
            return load_ivecs(path)
        log.info("ground-truth cache %s is stale; rebuilding", path)
    gt = build_ground_truth(base, queries, depth, threads)
    write_ivecs(path, gt)
    meta_path.write_text(json.dumps(want, indent=2))
    return gt


# -- synthetic benchmarks ----------------------------------------------------------


@dataclass(frozen=True)
class SyntheticSpec:
    N: int = 50_000
    d: int = 32
    n_clusters: int = 64
    cluster_std: float = 1.0
    seed: int = 0
    metric: str = "l2"
    n_queries: int = 500
    query_noise: float = 0.3  # fraction of cluster_std
    relevant_m: int = 1

    def __post_init__(self) -> None:
        if not (self.N >= self.n_clusters >= 1):
            raise ValueError(f"need N >= n_clusters >= 1, got N={self.N}, n_clusters={self.n_clusters}")
        if not self.cluster_std > 0:
            raise ValueError(f"cluster_std must be > 0, got {self.cluster_std}")
        if self.d < 1 or self.n_queries < 0 or self.relevant_m < 1:
            raise ValueError("d >= 1, n_queries >= 0 and relevant_m >= 1 are required")
        Metric(self.metric)


MINI_SIFT = SyntheticSpec()


@dataclass
class Benchmark:
    base: Dataset
    queries: np.ndarray
    ground_truth: np.ndarray
    relevance: list[np.ndarray] | None = None
    name: str = "mini-sift"
    meta: dict = field(default_factory=dict)

    @property
    def n_queries(self) -> int:
        return self.queries.shape[0]


def relevance_from_truth(ground_truth: np.ndarray, m: int = 1) -> list[np.ndarray]:
    """Mark each query's oracle top-``m`` as its relevant set."""
    return [row[:m].astype(np.int64) for row in np.asarray(ground_truth)]


def generate_synthetic(spec: SyntheticSpec = MINI_SIFT, gt_depth: int = GT_DEPTH, threads: int = 1) -> Benchmark:
    """Gaussian mixture base; each query is a base member plus small noise."""
    rng = np.random.default_rng(spec.seed)
    centers = rng.normal(size=(spec.n_clusters, spec.d))
    labels = rng.integers(0, spec.n_clusters, size=spec.N)
    base = centers[labels] + rng.normal(scale=spec.cluster_std, size=(spec.N, spec.d))
    anchors = rng.integers(0, spec.N, size=spec.n_queries)
    noise = rng.normal(scale=spec.cluster_std * spec.query_noise, size=(spec.n_queries, spec.d))
    queries = base[anchors] + noise
    if Metric(spec.metric) is Metric.IP:
        base /= np.linalg.norm(base, axis=1, keepdims=True)
        queries /= np.linalg.norm(queries, axis=1, keepdims=True)
    ds = Dataset(base.astype(np.float32), spec.metric)
    queries = queries.astype(np.float32)
    depth = min(gt_depth, spec.N)
    gt = build_ground_truth(ds, queries, depth, threads)
    return Benchmark(ds, queries, gt, relevance_from_truth(gt, spec.relevant_m), "synthetic", {"spec": asdict(spec)})


# -- on-disk benchmarks ----------------------------------------------------------------

MANIFEST_NAME = "benchmark.json"


def save_benchmark(bench: Benchmark, directory) -> Path:
    d = Path(directory)
    d.mkdir(parents=True, exist_ok=True)
    write_fvecs(d / "base.fvecs", bench.base.vectors)
    write_fvecs(d / "query.fvecs", bench.queries)
    write_ivecs(d / "groundtruth.ivecs", bench.ground_truth)
    manifest = {
        "name": bench.name,
        "metric": bench.base.metric.value,
        "files": {"base": "base.fvecs", "queries": "query.fvecs", "groundtruth": "groundtruth.ivecs"},
        "checksums": {
            "base": file_checksum(d / "base.fvecs"),
            "queries": file_checksum(d / "query.fvecs"),
            "groundtruth": file_checksum(d / "groundtruth.ivecs"),
        },
        "relevant_m": int(bench.relevance[0].size) if bench.relevance else 1,
        "meta": bench.meta,
    }
    path = d / MANIFEST_NAME
    path.write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    return path


def load_benchmark(path, verify: bool = True) -> Benchmark:
    path = Path(path)
    if path.is_dir():
        path = path / MANIFEST_NAME
    manifest = json.loads(path.read_text())
    root = path.parent
    files = {k: root / v for k, v in manifest["files"].items()}
    if verify:
        for key, want in manifest.get("checksums", {}).items():
            got = file_checksum(files[key])
            if got != want:
                raise ValueError(f"checksum mismatch for {files[key]}: manifest {want[:12]}, file {got[:12]}")
    base = Dataset(load_fvecs(files["base"]), manifest.get("metric", "l2"))
    queries = load_fvecs(files["queries"])
    gt = load_ivecs(files["groundtruth"])
    rel = relevance_from_truth(gt, manifest.get("relevant_m", 1))
    return Benchmark(base, queries, gt, rel, manifest.get("name", root.name), manifest.get("meta", {}))


def load_sift1m(directory, threads: int = 1) -> Benchmark:
    """SIFT1M from the standard texmex file names (``sift_base.fvecs`` etc.)."""
    d = Path(directory)
    base = Dataset(load_fvecs(d / "sift_base.fvecs"), "l2")
    queries = load_fvecs(d / "sift_query.fvecs")
    gt_path = d / "sift_groundtruth.ivecs"
    gt = load_ivecs(gt_path) if gt_path.exists() else cached_ground_truth(base, queries, d / "lanekit_gt.ivecs", threads=threads)
    return Benchmark(base, queries, gt, relevance_from_truth(gt, 1), "sift1m")


def data_root() -> Path:
    return Path(os.environ.get("LANEKIT_DATA", "data"))

"""Command-line front end for the experiment grid."""

from __future__ import annotations

import argparse
import csv
import json
import logging
import sys
import time
from dataclasses import asdict, replace
from pathlib import Path

import numpy as np

from lanekit import __version__
from lanekit._jit import backend_name
from lanekit.core import ConfigError
from lanekit.datasets import (
    MINI_SIFT,
    cached_ground_truth,
    data_root,
    file_checksum,
    generate_synthetic,
    save_benchmark,
)
from lanekit.experiments import (
    ExperimentManifest,
    IndexCache,
    build_index,
    recommend,
    resolve_benchmark,
    run_lanescale,
    run_poolsize,
    run_sweep,
    write_poolsize_csv,
)
from lanekit.index import save_index
from lanekit.lanes import LaneMode, planner_microbenchmark
from lanekit.metrics import write_metrics_csv

log = logging.getLogger("lanekit")


class CliError(Exception):
    """A user-facing failure: printed without a traceback, exit code 2."""


def _add_globals(p: argparse.ArgumentParser, suppress: bool) -> None:
    d = (lambda v: argparse.SUPPRESS) if suppress else (lambda v: v)
    p.add_argument("--manifest", type=Path, default=d(None), help="experiment manifest (JSON)")
    p.add_argument("--out", type=Path, default=d(None), help="output directory")
    p.add_argument("--threads", type=int, default=d(1), help="lane / ground-truth threads")
    p.add_argument("--seed", type=int, default=d(None), help="override the manifest seeds with one seed")
    p.add_argument("--paper-scale", action="store_true", default=d(False), help="use SIFT1M if present under $LANEKIT_DATA/sift1m")
    p.add_argument("--dataset", default=d(None), help="benchmark name or directory (default mini-sift)")
    p.add_argument("--index", choices=["hnsw", "ivf", "brute"], default=d(None))
    p.add_argument("--queries", type=int, default=d(None), help="use only the first N queries")
    p.add_argument("-v", "--verbose", action="store_true", default=d(False))


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="lanekit", description="alpha-partitioned multi-lane retrieval experiments")
    parser.add_argument("--version", action="version", version=f"lanekit {__version__}")
    _add_globals(parser, suppress=False)
    sub = parser.add_subparsers(dest="command", required=True)

    def cmd(name: str, help: str) -> argparse.ArgumentParser:
        p = sub.add_parser(name, help=help)
        _add_globals(p, suppress=True)
        return p

    p = cmd("gen", "generate the synthetic benchmark")
    p.add_argument("--N", type=int, default=MINI_SIFT.N)
    p.add_argument("--d", type=int, default=MINI_SIFT.d)
    p.add_argument("--clusters", type=int, default=MINI_SIFT.n_clusters)
    p.add_argument("--n-queries", type=int, default=MINI_SIFT.n_queries)
    p.add_argument("--metric", choices=["l2", "ip"], default="l2")

    p = cmd("build", "build an index and write it with a build log")
    p.add_argument("--param", action="append", default=[], metavar="KEY=VALUE", help="index parameter")

    p = cmd("groundtruth", "compute (or reuse) exact ground truth")
    p.add_argument("--depth", type=int, default=100)

    cmd("sweep", "alpha sweep with naive and single-index baselines")
    cmd("poolsize", "pool-size ablation at alpha=1")
    cmd("lanescale", "alpha in {0,1} for each lane count")

    for name, help in (("rho0", "measure naive-lane overlap"), ("recommend", "recommend alpha from measured overlap")):
        p = cmd(name, help)
        p.add_argument("--mode", default="naive", help="naive or jittered")
        p.add_argument("--sample", type=int, default=100, help="sample queries")
        p.add_argument("--M", type=int, default=None)

    p = cmd("microbench", "planner cost per query")
    p.add_argument("--trials", type=int, default=10_000)
    p.add_argument("--k-totals", default="16,32,64,128,256")
    p.add_argument("--M", type=int, default=4)
    return parser


# -- helpers ------------------------------------------------------------------------


def _manifest(args, **defaults) -> ExperimentManifest:
    if args.manifest is not None:
        if not args.manifest.exists():
            raise CliError(f"manifest not found: {args.manifest}")
        m = ExperimentManifest.load(args.manifest)
    else:
        m = ExperimentManifest(**defaults)
    over = {}
    if args.seed is not None:
        over["seeds"] = [args.seed]
    if args.dataset is not None:
        over["dataset"] = args.dataset
    if args.index is not None:
        over["index"] = args.index
    if args.queries is not None:
        over["n_queries"] = args.queries
    if args.out is not None:
        over["out"] = str(args.out)
    return replace(m, **over) if over else m


def _out_dir(args, manifest: ExperimentManifest | None = None) -> Path:
    out = args.out or (Path(manifest.out) if manifest else Path("results"))
    out.mkdir(parents=True, exist_ok=True)
    return out


def _bench(args, manifest: ExperimentManifest):
    try:
        return resolve_benchmark(manifest.dataset, args.paper_scale, args.threads)
    except (FileNotFoundError, ValueError) as exc:
        raise CliError(str(exc)) from exc


def _index_cache(args, manifest, bench) -> IndexCache:
    index_dir = Path(manifest.out) / "indexes"
    return IndexCache(bench, manifest.index, manifest.index_params, index_dir)


def _parse_param(text: str):
    key, sep, val = text.partition("=")
    if not sep:
        raise CliError(f"--param expects KEY=VALUE, got {text!r}")
    try:
        return key, json.loads(val)
    except json.JSONDecodeError:
        return key, val


def _write_json(path: Path, doc) -> None:
    path.write_text(json.dumps(doc, indent=2, sort_keys=True, default=_jsonable) + "\n")


def _jsonable(x):
    if isinstance(x, np.generic):
        return x.item()
    if isinstance(x, np.ndarray):
        return x.tolist()
    raise TypeError(f"not JSON serializable: {type(x).__name__}")


# -- subcommands ----------------------------------------------------------------------


def cmd_gen(args) -> int:
    spec = replace(
        MINI_SIFT,
        N=args.N, d=args.d, n_clusters=args.clusters, n_queries=args.n_queries,
        metric=args.metric, seed=0 if args.seed is None else args.seed,
    )
    bench = generate_synthetic(spec, threads=args.threads)
    bench.name = args.dataset or "mini-sift"
    out = args.out or data_root() / bench.name
    path = save_benchmark(bench, out)
    manifest = json.loads(path.read_text())
    print(json.dumps({"benchmark": str(path), "checksums": manifest["checksums"]}, indent=2))
    return 0


def cmd_build(args) -> int:
    manifest = _manifest(args)
    bench = _bench(args, manifest)
    params = dict(manifest.index_params)
    params.update(_parse_param(p) for p in args.param)
    seed = manifest.seeds[0]
    out = _out_dir(args, manifest) / "indexes"
    out.mkdir(parents=True, exist_ok=True)
    t0 = time.perf_counter()
    try:
        idx = build_index(bench, manifest.index, params, seed)
    except TypeError as exc:
        raise CliError(f"bad index parameter: {exc}") from exc
    build_s = time.perf_counter() - t0
    path = save_index(idx, out / f"{bench.name}-{manifest.index}-seed{seed}.lkx")
    build_log = {
        "index": str(path),
        "family": manifest.index,
        "dataset": bench.name,
        "N": bench.base.N,
        "d": bench.base.d,
        "seed": seed,
        "params": getattr(idx, "params", {}),
        "build_seconds": build_s,
        "backend": backend_name(),
        "sha256": file_checksum(path),
    }
    _write_json(path.with_suffix(".build.json"), build_log)
    print(json.dumps(build_log, indent=2, default=_jsonable))
    return 0


def cmd_groundtruth(args) -> int:
    manifest = _manifest(args)
    bench = _bench(args, manifest)
    out = _out_dir(args, manifest)
    path = out / f"{bench.name}-groundtruth-{args.depth}.ivecs"
    gt = cached_ground_truth(bench.base, bench.queries, path, args.depth, args.threads)
    print(json.dumps({"groundtruth": str(path), "rows": int(gt.shape[0]), "depth": int(gt.shape[1]),
                      "sha256": file_checksum(path)}, indent=2))
    return 0


def _report_skips(skipped, out: Path, name: str) -> None:
    for s in skipped:
        print(f"skipped: {s}", file=sys.stderr)
    if skipped:
        (out / f"{name}_skipped.txt").write_text("\n".join(skipped) + "\n")


def cmd_sweep(args) -> int:
    manifest = _manifest(args)
    bench = _bench(args, manifest)
    out = _out_dir(args, manifest)
    with (out / "sweep_outcomes.jsonl").open("w") as log_fh:
        res = run_sweep(manifest, bench, _index_cache(args, manifest, bench), threads=args.threads, log_fh=log_fh)
    with (out / "sweep.csv").open("w") as fh:
        write_metrics_csv(fh, res.rows)
    _report_skips(res.skipped, out, "sweep")
    _print_recall_table(res.rows)
    return 0


def _print_recall_table(rows) -> None:
    cells: dict[tuple, list[float]] = {}
    for r in rows:
        if r.metric.startswith("recall@"):
            cells.setdefault((r.M, r.alpha, r.metric), []).append(r.value)
    for (M, alpha, metric), vals in cells.items():
        print(f"M={M:<3} alpha={alpha:<8} {metric}={np.mean(vals):.3f} ± {np.std(vals):.3f}")


def cmd_poolsize(args) -> int:
    manifest = _manifest(args)
    bench = _bench(args, manifest)
    out = _out_dir(args, manifest)
    rows, skipped = run_poolsize(manifest, bench, _index_cache(args, manifest, bench), threads=args.threads)
    with (out / "poolsize.csv").open("w") as fh:
        write_poolsize_csv(fh, rows)
    _report_skips(skipped, out, "poolsize")
    for r in rows:
        print(f"ratio={r.pool_ratio:<5g} K_pool={r.K_pool:<4} alpha={r.alpha:<6g} seed={r.seed:<4} "
              f"recall={r.recall:.3f} union={r.union_size:.1f} predicted={r.predicted:.3f}")
    return 0


def cmd_lanescale(args) -> int:
    manifest = _manifest(args, M=[2, 4, 8])
    bench = _bench(args, manifest)
    out = _out_dir(args, manifest)
    with (out / "lanescale_outcomes.jsonl").open("w") as log_fh:
        res = run_lanescale(manifest, bench, _index_cache(args, manifest, bench), threads=args.threads, log_fh=log_fh)
    with (out / "lanescale.csv").open("w") as fh:
        write_metrics_csv(fh, res.rows)
    _report_skips(res.skipped, out, "lanescale")
    _print_recall_table(res.rows)
    return 0


def _recommendation(args):
    manifest = _manifest(args)
    bench = _bench(args, manifest)
    idx = _index_cache(args, manifest, bench).get(manifest.seeds[0])
    M = args.M or manifest.M[0]
    try:
        mode = LaneMode.parse(args.mode)
    except ValueError as exc:
        raise CliError(str(exc)) from exc
    sample = bench.queries[: min(args.sample, bench.n_queries)]
    return recommend(idx, sample, M, manifest.k_lane, mode, manifest.seeds[0])


def cmd_rho0(args) -> int:
    rec = _recommendation(args)
    print(json.dumps(rec.stats, indent=2, default=_jsonable))
    return 0


def cmd_recommend(args) -> int:
    rec = _recommendation(args)
    print(json.dumps(rec.to_dict(), indent=2, default=_jsonable))
    return 0


def cmd_microbench(args) -> int:
    try:
        k_totals = [int(x) for x in args.k_totals.split(",") if x.strip()]
    except ValueError as exc:
        raise CliError(f"bad --k-totals: {exc}") from exc
    report = planner_microbenchmark(k_totals, args.M, args.trials, seed=args.seed or 0)
    print(f"backend={backend_name()}")
    print(f"{'k_total':>8} {'mean_us':>9} {'p50_us':>9} {'p95_us':>9} {'p95/p50':>8}")
    for r in report.rows:
        print(f"{r.k_total:>8} {r.mean_us:>9.1f} {r.p50_us:>9.1f} {r.p95_us:>9.1f} {r.p95_us / r.p50_us:>8.2f}")
    print(f"slope={report.slope_us_per_candidate:.4f} us/candidate intercept={report.intercept_us:.1f} us r2={report.r2:.3f}")
    print("doubling ratios: " + ", ".join(f"{x:.2f}" for x in report.doubling_ratios()))
    if args.out is not None:
        out = _out_dir(args)
        with (out / "microbench.csv").open("w") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["k_total", "M", "trials", "mean_us", "p50_us", "p95_us"])
            for r in report.rows:
                w.writerow([r.k_total, r.M, r.trials, r.mean_us, r.p50_us, r.p95_us])
        _write_json(out / "microbench.json", {
            "rows": [asdict(r) for r in report.rows],
            "slope_us_per_candidate": report.slope_us_per_candidate,
            "intercept_us": report.intercept_us,
            "r2": report.r2,
            "doubling_ratios": report.doubling_ratios(),
            "backend": backend_name(),
        })
    return 0


COMMANDS = {
    "gen": cmd_gen,
    "build": cmd_build,
    "groundtruth": cmd_groundtruth,
    "sweep": cmd_sweep,
    "poolsize": cmd_poolsize,
    "lanescale": cmd_lanescale,
    "rho0": cmd_rho0,
    "recommend": cmd_recommend,
    "microbench": cmd_microbench,
}


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.INFO if args.verbose else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
    )
    if args.threads < 1:
        print("error: --threads must be >= 1", file=sys.stderr)
        return 2
    try:
        return COMMANDS[args.command](args)
    except (CliError, ConfigError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())

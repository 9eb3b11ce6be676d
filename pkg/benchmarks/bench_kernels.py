"""Time the numba kernels against the numpy fallback.

Each backend runs in its own interpreter because the choice is made at
import time from LANEKIT_DISABLE_NUMBA. The numba run does one untimed
warmup pass so JIT compilation is not counted. The numpy HNSW build is
pure Python and dominates the wall time; keep N small.

    python benchmarks/bench_kernels.py [--N 2000] [--d 32] [--repeat 1]
"""

from __future__ import annotations

import argparse
import json
import os
import subprocess
import sys

WORKER = r"""
import json, sys, time
import numpy as np
from lanekit._jit import backend_name
from lanekit.datasets import SyntheticSpec, generate_synthetic
from lanekit.index import brute_force_topk, hnsw_build, ivf_build
from lanekit.prf import prf_scores

N, d, repeat = int(sys.argv[1]), int(sys.argv[2]), int(sys.argv[3])
bench = generate_synthetic(SyntheticSpec(N=N, d=d, n_clusters=16, n_queries=50, seed=0))
ds, Q = bench.base, bench.queries
ids = np.arange(1 << 18, dtype=np.uint64)
hn = hnsw_build(ds, graph_degree=12, ef_construction=60, seed=0)

cases = {
    "prf_scores (262k ids)": lambda: prf_scores(7, ids),
    "brute top-10 x50 queries": lambda: [brute_force_topk(ds, q, 10) for q in Q],
    "ivf build (nlist 32)": lambda: ivf_build(ds, nlist=32, seed=0),
    "hnsw build": lambda: hnsw_build(ds, graph_degree=12, ef_construction=60, seed=0),
    "hnsw search ef=64 x50": lambda: [hn.search(q, 64, 10) for q in Q],
}
out = {}
for name, fn in cases.items():
    fn()
    best = float("inf")
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t0)
    out[name] = best
print(json.dumps({"backend": backend_name(), "times": out}))
"""


def run(disable: bool, args) -> dict:
    env = dict(os.environ)
    env.pop("LANEKIT_DISABLE_NUMBA", None)
    if disable:
        env["LANEKIT_DISABLE_NUMBA"] = "1"
    proc = subprocess.run(
        [sys.executable, "-c", WORKER, str(args.N), str(args.d), str(args.repeat)],
        env=env, capture_output=True, text=True,
    )
    if proc.returncode:
        sys.stderr.write(proc.stderr)
        raise SystemExit(f"benchmark worker failed (LANEKIT_DISABLE_NUMBA={int(disable)})")
    return json.loads(proc.stdout.strip().splitlines()[-1])


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--N", type=int, default=2000)
    ap.add_argument("--d", type=int, default=32)
    ap.add_argument("--repeat", type=int, default=1)
    ap.add_argument("--json", action="store_true", help="print raw timings as JSON")
    args = ap.parse_args(argv)

    fast, slow = run(False, args), run(True, args)
    if args.json:
        print(json.dumps({"numba": fast, "numpy": slow}, indent=2))
        return 0
    print(f"N={args.N} d={args.d} best of {args.repeat}  ({fast['backend']} vs {slow['backend']})")
    print(f"{'kernel':<28}{'numba s':>10}{'numpy s':>10}{'speedup':>9}")
    for name, t_fast in fast["times"].items():
        t_slow = slow["times"][name]
        print(f"{name:<28}{t_fast:>10.4f}{t_slow:>10.4f}{t_slow / t_fast:>8.1f}x")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())

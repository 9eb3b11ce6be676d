import io
import json

import numpy as np
import pytest

from lanekit.core import ConfigError
from lanekit.experiments import (
    ExperimentManifest,
    IndexCache,
    pool_size_for,
    recommend,
    run_lanescale,
    run_poolsize,
    run_sweep,
    write_poolsize_csv,
)
from lanekit.index import save_index
from lanekit.lanes import LaneMode


def test_manifest_validation_and_expand(tmp_path):
    m = ExperimentManifest()
    assert len(m.expand()) == 5 * 3
    assert m.seeds == [42, 123, 789]
    p = tmp_path / "m.json"
    p.write_text(json.dumps({"M": [2, 4], "alphas": [0, 1], "seeds": [1]}))
    assert len(ExperimentManifest.load(p).expand()) == 4
    with pytest.raises(ConfigError):
        ExperimentManifest.from_dict({"colour": "red"})
    with pytest.raises(ConfigError):
        ExperimentManifest(index="pq")
    with pytest.raises(ConfigError):
        ExperimentManifest(alphas=[1.5]).expand()
    with pytest.raises(ValueError):
        ExperimentManifest(modes=["hedged"])


def test_pool_size_rounding():
    assert [pool_size_for(r, 64) for r in (0.8, 0.9, 1.0, 1.1, 1.25, 1.5)] == [52, 58, 64, 71, 80, 96]


def test_sweep_rows_and_invariants(small_bench):
    m = ExperimentManifest(index="hnsw", seeds=[1, 2], n_queries=15, modes=["naive", "jittered"])
    res = run_sweep(m, small_bench)
    for seed in (1, 2):
        assert res.recall(4, seed, 1.0) == res.recall(4, seed, "single")
        per = np.vstack([res.per_query_recall(4, seed, a) for a in m.alphas])
        assert (np.diff(per, axis=0) >= 0).all()
        assert res.cells[(4, seed, "0")].rho == [1.0] * 15
        assert res.cells[(4, seed, "1")].rho == [0.0] * 15
        assert res.cells[(4, seed, "naive")].rho == [1.0] * 15
    metrics = {r.metric for r in res.rows}
    assert {"recall@10", "hit@10", "mrr@10", "overlap", "union_size", "gain_predicted", "gain_measured"} <= metrics
    gains = {(r.alpha, r.metric): r.value for r in res.rows if r.seed == 1 and r.metric.startswith("gain")}
    assert gains[("naive", "gain_predicted")] == gains[("naive", "gain_measured")] == 4.0


def test_sweep_is_reproducible(small_bench):
    m = ExperimentManifest(seeds=[3], n_queries=8)
    a = run_sweep(m, small_bench)
    b = run_sweep(m, small_bench, threads=4)
    strip = lambda rows: [(r.alpha, r.metric, r.value) for r in rows]
    assert strip(a.rows) == strip(b.rows)


def test_sweep_logs_outcomes(small_bench):
    buf = io.StringIO()
    run_sweep(ExperimentManifest(seeds=[3], n_queries=2, alphas=[1.0]), small_bench, log_fh=buf)
    recs = [json.loads(x) for x in buf.getvalue().splitlines()]
    assert [r["mode"] for r in recs] == ["partitioned", "naive", "single"] * 2
    assert all("recall" in r and "seed" in r for r in recs)


def test_poolsize_cap_and_peak(small_bench):
    m = ExperimentManifest(seeds=[1], n_queries=15)
    rows, skipped = run_poolsize(m, small_bench)
    assert not skipped
    by_ratio = {r.pool_ratio: r for r in rows}
    for ratio in (0.8, 0.9):
        assert by_ratio[ratio].union_min == by_ratio[ratio].union_max == by_ratio[ratio].K_pool
    for ratio in (1.1, 1.25, 1.5):
        assert by_ratio[1.0].recall >= by_ratio[ratio].recall
    assert by_ratio[1.5].predicted == pytest.approx(2 / 3)
    buf = io.StringIO()
    write_poolsize_csv(buf, rows)
    assert buf.getvalue().startswith("dataset,index,M,k_lane,alpha,seed,pool_ratio,K_pool,recall@10")


def test_poolsize_skips_infeasible(small_bench):
    rows, skipped = run_poolsize(ExperimentManifest(seeds=[1], n_queries=2, pool_ratios=[0.2, 1.0]), small_bench)
    assert len(rows) == 1 and "no feasible alpha" in skipped[0]


def test_lanescale_ivf(small_bench):
    m = ExperimentManifest(index="ivf", M=[2, 4, 8], seeds=[1], n_queries=10, index_params={"nlist": 32})
    res = run_lanescale(m, small_bench)
    for M in (2, 4, 8):
        assert res.per_query_recall(M, 1, 1.0).tolist() == res.per_query_recall(M, 1, "single").tolist()
    assert res.recall(2, 1, 0.0) >= res.recall(4, 1, 0.0) >= res.recall(8, 1, 0.0)


def test_index_cache_reuses_saved_index(tmp_path, small_bench, small_hnsw):
    cache = IndexCache(small_bench, "hnsw", index_dir=tmp_path)
    save_index(small_hnsw, cache.path_for(1))
    idx = cache.get(1)
    np.testing.assert_array_equal(idx.links, small_hnsw.links)
    assert cache.get(1) is idx


def test_recommend_identical_and_jittered(small_hnsw, small_bench):
    rec = recommend(small_hnsw, small_bench.queries[:10], 4, 16)
    assert rec.alpha == 1.0 and rec.gain == 4.0 and rec.stats["rho0"] == 1.0
    jit = recommend(small_hnsw, small_bench.queries[:10], 4, 16, LaneMode.naive_jittered())
    assert jit.alpha in (0.5, 0.7, 1.0)
    assert 1.0 <= jit.gain <= 4.0

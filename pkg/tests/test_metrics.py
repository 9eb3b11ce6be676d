import io
import itertools

import numpy as np
import pytest

from lanekit.core import PartitionConfig
from lanekit.lanes import LaneMode
from lanekit.metrics import (
    CSV_COLUMNS,
    EmptyRelevanceError,
    MetricRow,
    QualityReport,
    hit_at_k,
    jaccard_overlap,
    mean_over_queries,
    measure_rho0,
    mrr_at_k,
    overlap_stats,
    read_metrics_csv,
    recall_at_k,
    write_metrics_csv,
)


def test_jaccard_worked_example():
    assert jaccard_overlap([{"a", "b", "c"}, {"a", "b", "d"}, {"a", "b", "e"}]) == 0.4


def test_jaccard_identical_and_disjoint():
    assert jaccard_overlap([{1, 2}, {1, 2}, {2, 1}]) == 1.0
    assert jaccard_overlap([{1}, {2}, {3}]) == 0.0
    with pytest.raises(ValueError):
        jaccard_overlap([set(), set()])
    with pytest.raises(ValueError):
        jaccard_overlap([])


def test_jaccard_permutation_invariant(rng):
    sets = [set(rng.integers(0, 30, 10).tolist()) for _ in range(4)]
    vals = {jaccard_overlap(list(p)) for p in itertools.permutations(sets)}
    assert len(vals) == 1


def test_recall():
    truth = list(range(100))
    assert recall_at_k(list(range(10)), truth, 10) == 1.0
    assert recall_at_k(list(range(200, 210)), truth, 10) == 0.0
    assert recall_at_k([0, 1, 2, 3, 4, 50, 51, 52, 53, 54], truth, 10) == 0.5
    with pytest.raises(ValueError):
        recall_at_k([1], truth, 0)
    with pytest.raises(ValueError):
        recall_at_k([1], [1, 2], 10)


def test_hit_and_mrr():
    res = list(range(100, 120))
    assert hit_at_k(res, {109}, 10) == 1
    assert hit_at_k(res, {110}, 10) == 0
    assert hit_at_k(res, {100, 101}, 10) == 1
    assert mrr_at_k(res, {100}, 10) == 1.0
    assert mrr_at_k(res, {103, 105}, 10) == 0.25
    assert mrr_at_k(res, {999}, 10) == 0.0
    with pytest.raises(EmptyRelevanceError):
        hit_at_k(res, set(), 10)


def test_metrics_monotone_under_extension():
    truth = list(range(10)) + list(range(50, 140))
    short = [0, 77, 3]
    longer = short + [1, 2, 99]
    assert recall_at_k(longer, truth, 10) >= recall_at_k(short, truth, 10)
    assert mrr_at_k(longer, {2}, 10) >= mrr_at_k(short, {2}, 10)


def test_empty_relevance_excluded_and_counted():
    mean, excluded = mean_over_queries(hit_at_k, [[1, 2], [3, 4], [5]], [{1}, set(), {9}], 10)
    assert mean == 0.5 and excluded == 1


def test_overlap_stats_injected_disjoint_and_identical():
    disjoint = [[set(range(r * 4, r * 4 + 4)) for r in range(3)]]
    st = overlap_stats(disjoint, M=3, k_lane=4)
    assert st.rho0 == 0.0 and st.U0 == 12 and st.U0_approx() == 12
    same = [[{1, 2, 3, 4}] * 3]
    st = overlap_stats(same, M=3, k_lane=4)
    assert st.rho0 == 1.0 and st.U0 == 4 and st.U0_approx() == 4


def test_measure_rho0_identical_lanes(small_hnsw, small_ivf, small_bench):
    cfg = PartitionConfig(4, 16, 0.0, 64)
    for idx in (small_hnsw, small_ivf):
        st = measure_rho0(idx, small_bench.queries[:10], cfg)
        assert st.rho0 == 1.0 and st.rho0_std == 0.0 and st.U0 == 16
    st = measure_rho0(small_hnsw, small_bench.queries[:10], cfg, LaneMode.naive_jittered())
    assert 0.0 <= st.rho0 <= 1.0 and 16 <= st.U0 <= 64
    with pytest.raises(ValueError):
        measure_rho0(small_hnsw, small_bench.queries[:0], cfg)


def test_quality_report():
    rep = QualityReport("recall@10", {42: 0.5, 123: 0.7, 789: 0.6})
    assert rep.mean == pytest.approx(0.6) and rep.std >= 0
    assert str(rep).startswith("recall@10: 0.600")


def test_metrics_csv_round_trip():
    rows = [MetricRow("mini-sift", "hnsw", 4, 16, "0.5", 42, "recall@10", 0.1 + 0.2),
            MetricRow("mini-sift", "hnsw", 4, 16, "naive", 42, "overlap", 1.0)]
    buf = io.StringIO()
    write_metrics_csv(buf, rows)
    assert buf.getvalue().splitlines()[0] == ",".join(CSV_COLUMNS)
    buf.seek(0)
    assert read_metrics_csv(buf) == rows

import json

import pytest

from lanekit.core import (
    ConfigError,
    CostCounters,
    HeterogeneousPartitionConfig,
    LaneResult,
    PartitionConfig,
    derive_quotas,
)


@pytest.mark.parametrize(
    "M,k_lane,alpha,expected",
    [(4, 16, 1.0, (16, 0, 64)), (4, 16, 0.0, (0, 16, 64)), (2, 4, 0.5, (2, 2, 8))],
)
def test_derive_quotas_examples(M, k_lane, alpha, expected):
    assert derive_quotas(PartitionConfig(M, k_lane, alpha, M * k_lane)) == expected


def test_floor_is_robust_to_float_products():
    # 0.7 * 10 is 6.999... in binary floating point
    assert PartitionConfig(2, 10, 0.7, 20).k_ded == 7
    assert PartitionConfig(2, 10, 0.29, 20).k_ded == 2


@pytest.mark.parametrize("M,k_lane,alpha", [(1, 1, 0.0), (3, 7, 0.33), (8, 5, 0.99), (5, 9, 1.0)])
def test_quotas_sum_to_k_lane(M, k_lane, alpha):
    cfg = PartitionConfig(M, k_lane, alpha, M * k_lane)
    assert cfg.k_ded + cfg.k_shr == k_lane
    assert 0 <= cfg.k_ded <= k_lane


def test_feasibility_boundary():
    # M*k_ded + k_shr = 4*8 + 8 = 40
    PartitionConfig(4, 16, 0.5, 40)
    with pytest.raises(ConfigError, match="infeasible"):
        PartitionConfig(4, 16, 0.5, 39)
    PartitionConfig(4, 16, 0.0, 16)
    with pytest.raises(ConfigError):
        PartitionConfig(4, 16, 1.0, 63)


def test_feasibility_rejects_exactly_the_violators():
    for M in range(1, 5):
        for k_lane in range(1, 6):
            for alpha in (0.0, 0.25, 0.5, 0.75, 1.0):
                for K_pool in range(1, M * k_lane + 2):
                    k_ded = int(alpha * k_lane)
                    need = M * k_ded + (k_lane - k_ded)
                    if K_pool >= need:
                        PartitionConfig(M, k_lane, alpha, K_pool)
                    else:
                        with pytest.raises(ConfigError):
                            PartitionConfig(M, k_lane, alpha, K_pool)


@pytest.mark.parametrize(
    "kw",
    [
        dict(M=0, k_lane=4, alpha=0.5, K_pool=8),
        dict(M=2, k_lane=0, alpha=0.5, K_pool=8),
        dict(M=2, k_lane=4, alpha=1.5, K_pool=8),
        dict(M=2, k_lane=4, alpha=-0.1, K_pool=8),
        dict(M=2, k_lane=4, alpha=0.5, K_pool=0),
        dict(M=2.0, k_lane=4, alpha=0.5, K_pool=8),
        dict(M=2, k_lane=4, alpha=0.5, K_pool=8, query_seed=-1),
        dict(M=2, k_lane=4, alpha=0.5, K_pool=8, query_seed=1 << 64),
        dict(M=True, k_lane=4, alpha=0.5, K_pool=8),
    ],
)
def test_invalid_fields_rejected(kw):
    with pytest.raises(ConfigError):
        PartitionConfig(**kw)


def test_json_round_trip_and_unknown_keys(tmp_path):
    cfg = PartitionConfig(4, 16, 0.75, 64, query_seed=(1 << 64) - 1)
    text = json.dumps(cfg.to_dict())
    assert PartitionConfig.from_json(text) == cfg
    path = tmp_path / "cfg.json"
    path.write_text(text)
    assert PartitionConfig.from_json(path) == cfg
    with pytest.raises(ConfigError, match="unknown"):
        PartitionConfig.from_dict({**cfg.to_dict(), "k_total": 64})
    with pytest.raises(ConfigError, match="missing"):
        PartitionConfig.from_dict({"M": 4, "k_lane": 16, "alpha": 1.0})


def test_config_is_immutable():
    cfg = PartitionConfig(2, 4, 0.5, 8)
    with pytest.raises(AttributeError):
        cfg.M = 3
    assert cfg.with_alpha(1.0).k_ded == 4
    assert cfg.with_seed(9).query_seed == 9


def test_heterogeneous_feasibility():
    cfg = HeterogeneousPartitionConfig((2, 6), 1.0, 8)
    assert cfg.k_total == 8 and cfg.k_ded == (2, 6) and cfg.shared_start == 8
    # alpha=0.5: k_ded=(1,3), k_shr=(1,3): need 4 + 3
    HeterogeneousPartitionConfig((2, 6), 0.5, 7)
    with pytest.raises(ConfigError):
        HeterogeneousPartitionConfig((2, 6), 0.5, 6)
    with pytest.raises(ConfigError):
        HeterogeneousPartitionConfig((), 0.5, 6)
    with pytest.raises(ConfigError):
        HeterogeneousPartitionConfig((0, 2), 0.5, 6)


def test_cost_counters_add():
    a = CostCounters(1, 2, 3, 0.5)
    b = CostCounters(10, 20, 30, 0.25)
    assert (a + b).work() == (11, 22, 33)
    assert CostCounters.total([a, b, a]).node_visits == 12
    assert CostCounters.total([]).work() == (0, 0, 0)


def test_lane_result_rejects_duplicates():
    with pytest.raises(ValueError, match="duplicate"):
        LaneResult(0, [1, 2, 1], [0.1, 0.2, 0.3])
    with pytest.raises(ValueError):
        LaneResult(0, [1, 2], [0.1])

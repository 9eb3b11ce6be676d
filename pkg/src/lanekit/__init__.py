"""Coordination-free alpha-partitioning of candidate budgets across parallel search lanes."""

from lanekit.core import (
    ConfigError,
    CostCounters,
    HeterogeneousPartitionConfig,
    LaneResult,
    MergedResult,
    PartitionConfig,
    derive_quotas,
)
from lanekit.lanes import LaneMode, QueryOutcome, StragglerPolicy, run_query, run_single_baseline
from lanekit.planner import (
    alpha_partition,
    alpha_partition_heterogeneous,
    coverage,
    predicted_gain,
    recommend_alpha,
)
from lanekit.prf import PrfKey, permute_pool, prf_score

__version__ = "0.1.0"

__all__ = [
    "ConfigError",
    "CostCounters",
    "HeterogeneousPartitionConfig",
    "LaneMode",
    "LaneResult",
    "MergedResult",
    "PartitionConfig",
    "PrfKey",
    "QueryOutcome",
    "StragglerPolicy",
    "alpha_partition",
    "alpha_partition_heterogeneous",
    "coverage",
    "derive_quotas",
    "permute_pool",
    "predicted_gain",
    "prf_score",
    "recommend_alpha",
    "run_query",
    "run_single_baseline",
]

import numpy as np
import pytest

from lanekit.datasets import MINI_SIFT, SyntheticSpec, generate_synthetic
from lanekit.experiments import IndexCache


@pytest.fixture(scope="session")
def small_bench():
    bench = generate_synthetic(SyntheticSpec(N=3000, d=16, n_clusters=16, n_queries=40, seed=5))
    bench.name = "small"
    return bench


@pytest.fixture(scope="session")
def small_hnsw(small_bench):
    from lanekit.index import hnsw_build

    return hnsw_build(small_bench.base, graph_degree=12, ef_construction=80, seed=1)


@pytest.fixture(scope="session")
def small_ivf(small_bench):
    from lanekit.index import ivf_build

    return ivf_build(small_bench.base, nlist=32, seed=1)


@pytest.fixture(scope="session")
def mini_sift():
    bench = generate_synthetic(MINI_SIFT)
    bench.name = "mini-sift"
    return bench


@pytest.fixture(scope="session")
def mini_hnsw(mini_sift):
    return IndexCache(mini_sift, "hnsw")


@pytest.fixture(scope="session")
def mini_ivf(mini_sift):
    return IndexCache(mini_sift, "ivf")


@pytest.fixture
def rng():
    return np.random.default_rng(0)


def pytest_terminal_summary(terminalreporter):
    import sys

    mods = [m for name, m in list(sys.modules.items()) if name.split(".")[-1] == "test_acceptance"]
    results = getattr(mods[0], "RESULTS", {}) if mods else {}
    if results:
        terminalreporter.section("acceptance")
        for line in results.values():
            terminalreporter.write_line(line)

"""
Shared fixtures: small graphs and models, seeded streams and a clean oracle.
"""
import shutil
from pathlib import Path

import pytest

from spinlab.core.graph import Graph
from spinlab.core.models import make_bipartite_hardcore, make_hardcore, make_list_coloring, make_two_spin
from spinlab.coupling import recursive
from spinlab.dynamics.rng import RandomStream
from spinlab.oracle.exact import reset_oracle
from spinlab.utils.config import DEFAULT_CONFIG_DIR, reset_config


@pytest.fixture(autouse=True)
def fresh_oracle():
    """Every test starts with an empty enumeration cache."""
    reset_oracle()
    recursive._split_cache.clear()
    yield


@pytest.fixture
def config_dir(tmp_path):
    """A private copy of ``default.yaml`` loaded as the active configuration."""
    target = tmp_path / "config"
    target.mkdir()
    shutil.copy(Path(DEFAULT_CONFIG_DIR) / "default.yaml", target / "default.yaml")
    reset_config(str(target))
    yield target
    reset_config()


@pytest.fixture
def stream():
    return RandomStream(1234)


@pytest.fixture
def hardcore_path3():
    return make_hardcore(Graph.path(3), 1.0)


@pytest.fixture
def hardcore_cycle6():
    return make_hardcore(Graph.cycle(6), 1.0)


@pytest.fixture
def antiferro_path4():
    return make_two_spin(Graph.path(4), 0.5, 0.5, 1.0)


@pytest.fixture
def ising_k2():
    return make_two_spin(Graph.complete(2), 2.0, 2.0, 1.0)


@pytest.fixture
def coloring_cycle4():
    return make_list_coloring(Graph.cycle(4), [range(3)] * 4)


@pytest.fixture
def bipartite_hardcore_k22():
    return make_bipartite_hardcore(Graph.complete_bipartite(2, 2), 1.0)

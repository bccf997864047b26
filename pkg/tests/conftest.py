import numpy as np
import pytest

from recwatch.graph import GlpParams, Graph, generate_glp


@pytest.fixture(scope="session")
def small_glp_graph():
    """2000-node scale-free fixture shared by the slower structural tests."""
    params = GlpParams(
        target_nodes=2000,
        initial_clique=10,
        edges_per_step=7,
        p_add_edges=0.2,
        beta=-5.4,
        seed=3,
    )
    return generate_glp(params)


@pytest.fixture
def triangle():
    return Graph(3, [(0, 1), (1, 2), (0, 2)])


@pytest.fixture
def star4():
    """One center, three leaves."""
    return Graph(4, [(0, 1), (0, 2), (0, 3)])


@pytest.fixture
def path3():
    return Graph(3, [(0, 1), (1, 2)])


@pytest.fixture
def rng():
    return np.random.default_rng(12345)

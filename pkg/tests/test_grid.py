import numpy as np
import pytest
from hypothesis import given, strategies as st

from fracsing.grid import Grid, build_grid, compact_subset


def test_nodes_and_spacing():
    g = build_grid(-1, 1, 8)
    assert g.h == 0.25
    assert g.size == 7
    np.testing.assert_allclose(g.nodes, np.linspace(-0.75, 0.75, 7))


def test_delta_is_distance_to_nearest_endpoint():
    g = build_grid(0.0, 3.0, 12)
    np.testing.assert_allclose(g.delta, np.minimum(g.nodes - g.a, g.b - g.nodes), atol=1e-14)


@given(st.integers(4, 300), st.floats(-5, 5), st.floats(0.1, 10))
def test_delta_exactly_symmetric(n, a, length):
    g = build_grid(a, a + length, n)
    assert np.array_equal(g.delta, g.delta[::-1])
    assert g.delta.min() > 0


@pytest.mark.parametrize("args", [(1, 1, 8), (1, 0, 8), (0, 1, 3), (0, 1, 7.5)])
def test_invalid_grids(args):
    with pytest.raises(ValueError):
        build_grid(*args)


def test_arrays_are_read_only():
    g = build_grid(0, 1, 8)
    with pytest.raises(ValueError):
        g.nodes[0] = 3.0


def test_equality_and_refinement():
    g = build_grid(0, 1, 8)
    assert g == Grid(0, 1, 8)
    assert hash(g) == hash(Grid(0, 1, 8))
    assert g.refined(2).n_cells == 16


def test_compact_subset():
    g = build_grid(-1, 1, 16)
    k = compact_subset(g, 0.25)
    assert np.all(g.delta[k.indices] >= 0.25 - 1e-12)
    assert len(k.indices) == 13
    with pytest.raises(ValueError):
        compact_subset(g, 1.0)
    with pytest.raises(ValueError):
        compact_subset(g, 0.0)

import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from fracsing.grid import build_grid
from fracsing.nonlinearity import (HSpec, MeasureSpec, SourceSpec, density_on, h_derivative, h_eval,
                                   h_truncated, measure_approximant, singular_term, source_truncated, truncate,
                                   zero_measure)

H = HSpec()


def test_truncate_examples():
    assert truncate(2, 5.0) == 2.0
    assert truncate(2, -5.0) == -2.0
    np.testing.assert_array_equal(truncate(1, np.array([-3, 0.5, 3])), [-1, 0.5, 1])
    with pytest.raises(ValueError):
        truncate(0, 1.0)


@given(st.floats(0.01, 100), st.floats(-1e3, 1e3))
def test_truncate_is_idempotent_and_bounded(k, x):
    t = truncate(k, x)
    assert abs(t) <= k
    assert truncate(k, t) == t


def test_singular_term():
    assert singular_term(np.array([4.0]), 0.5)[0] == 0.5
    with pytest.raises(ValueError):
        singular_term(np.array([1.0, 0.0]), 0.5)


def test_h_canonical_growth_bounds():
    t = np.logspace(-6, 6, 200)
    h = h_eval(H, t)
    assert np.all(np.diff(h) <= 0)
    low = t <= 1
    assert np.all(h[low] <= t[low] ** -0.5)
    assert np.all(h[~low] <= t[~low] ** -2.0)
    assert h_eval(H, 1e8) < 1e-15


def test_h_derivative_matches_finite_difference():
    for t in (0.1, 1.0, 3.0):
        fd = (h_eval(H, t * (1 + 1e-6)) - h_eval(H, t * (1 - 1e-6))) / (2e-6 * t)
        assert h_derivative(H, t) == pytest.approx(fd, rel=1e-6)


def test_h_truncated():
    assert h_truncated(2, H, 1e-6) == 2
    assert h_truncated(math.inf, H, 0.25) == pytest.approx(h_eval(H, 0.25))
    with pytest.raises(ValueError):
        h_truncated(0.5, H, 1.0)
    with pytest.raises(ValueError):
        h_eval(H, 0.0)


@pytest.mark.parametrize("kw", [{"gamma": 0}, {"gamma": 1.5}, {"theta": 0}, {"c1": -1}, {"form": "other"}])
def test_hspec_rejects(kw):
    with pytest.raises(ValueError):
        HSpec(**kw)


def test_source_specs():
    g = build_grid(-1, 1, 8)
    np.testing.assert_array_equal(SourceSpec().nodal(g), np.ones(7))
    f = SourceSpec("boundary_singular", 2.0, 0.5).nodal(g)
    np.testing.assert_allclose(f, 2 * g.delta ** -0.5)
    assert source_truncated(3, SourceSpec("boundary_singular", 2.0, 0.5), g).max() == 3
    with pytest.raises(ValueError):
        SourceSpec(beta=1.0)


def test_measure_mass_and_pairing():
    g = build_grid(-1, 1, 8)
    mu = MeasureSpec("l1_density", density=np.ones(7))
    assert mu.total_mass(g) == pytest.approx(7 * 0.25)
    atom = MeasureSpec("dirac", atom_location=0.1, mass=2.0)
    phi = np.arange(7.0)
    assert atom.pair(phi, g) == 2.0 * phi[3]
    assert zero_measure(g).total_mass(g) == 0
    with pytest.raises(ValueError):
        MeasureSpec("l1_density", density=-np.ones(7))
    with pytest.raises(ValueError):
        MeasureSpec("dirac", atom_location=2.0, mass=1.0).pair(phi, g)


def test_density_profiles():
    g = build_grid(-1, 1, 12)
    d = density_on(g, {"type": "power", "exponent": 0.5, "center": 1 / 3 + 0.01})
    assert d.max() > 1
    with pytest.raises(ValueError):
        density_on(g, {"type": "power", "exponent": 1.0, "center": 0.1})
    with pytest.raises(ValueError):
        density_on(g, {"type": "power", "exponent": 0.5, "center": 0.0})
    with pytest.raises(ValueError):
        density_on(g, {"type": "values", "values": [1, 2]})


def test_measure_schedules():
    g = build_grid(-1, 1, 64)
    mu = MeasureSpec("l1_density", density=density_on(g, {"type": "power", "exponent": 0.5, "center": 1 / 3}))
    t4 = measure_approximant(mu, 4, g)
    assert t4.max() == 4
    m4 = measure_approximant(mu, 4, g, "mollified")
    # kernel weights sum to one; mass only leaks through the two ends
    assert abs(m4.sum() - t4.sum()) <= t4[0] + t4[-1]
    assert np.max(np.abs(m4 - t4)) <= 4 / 16
    np.testing.assert_array_equal(measure_approximant(mu, math.inf, g, "mollified"), mu.density)
    prev = None
    for n in (1, 2, 4, 8):
        cur = measure_approximant(mu, n, g)
        if prev is not None:
            assert np.all(cur >= prev)
        prev = cur
    with pytest.raises(ValueError):
        measure_approximant(mu, 4, g, "other")

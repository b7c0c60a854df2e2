import math

import numpy as np
import pytest

from fracsing import analysis
from fracsing.grid import build_grid
from fracsing.solver import approximation_limit


@pytest.fixture(scope="module")
def canonical_limit(canonical128):
    problem, op = canonical128
    return approximation_limit(problem, [1, 2, 4, 8, 16], op).solution


def test_energy_growth_passes_on_solution(canonical_limit, canonical128):
    _, op = canonical128
    cert = analysis.energy_growth_certificate(canonical_limit, op, [1, 2, 4, 8, 16])
    assert cert.passed
    assert cert.data["truncation_gap"] <= 1e-9
    e = cert.data["energy"]
    assert all(b >= a - 1e-12 for a, b in zip(e, e[1:]))


def test_energy_growth_flags_superlinear_growth():
    # delta^-0.9 at s = 0.45: e(k) grows like k^{1.89}
    from fracsing.operator import assemble_operator
    g = build_grid(-1, 1, 256)
    cert = analysis.energy_growth_certificate(g.delta ** -0.9, assemble_operator(g, 0.45), [1, 2, 4, 8, 16])
    assert not cert.passed


@pytest.mark.parametrize("ks", [[1, 2], [2, 1, 4], [1, 2, 4]])
def test_energy_growth_rejects_bad_levels(canonical128, ks):
    _, op = canonical128
    with pytest.raises(ValueError):
        analysis.energy_growth_certificate(np.ones(op.size), op, ks)


def test_tail_exponent_on_power_profiles():
    g = build_grid(-1, 1, 4096)
    ks = [1, 2, 4, 8, 16]
    good = analysis.tail_exponent_certificate(g.delta ** -0.4, g, 0.25, ks)
    assert good.passed and good.data["slope"] == pytest.approx(-2.5, abs=0.1)
    assert good.data["target_exponent"] == 2.0
    assert not analysis.tail_exponent_certificate(g.delta ** -0.8, g, 0.25, ks).passed
    assert analysis.tail_exponent_certificate(np.ones(g.size), g, 0.25, ks).data["vanishes"]
    with pytest.raises(analysis.RegimeError):
        analysis.tail_exponent_certificate(np.ones(g.size), g, 0.5, ks)


def test_critical_exponents():
    assert analysis.tail_exponent(0.25) == 2.0
    assert analysis.critical_exponent(0.25) == 4.0


@pytest.mark.parametrize("s", [0.1, 0.25, 0.4])
def test_envelope_analytic_control(s):
    g = build_grid(-1, 1, 256)
    cert = analysis.boundary_envelope_certificate((1 - g.nodes**2) ** s, g, s)
    assert cert.data["spread"] <= 2**s + 1e-9


def test_envelope_refinement_detects_wrong_power():
    coarse, fine = build_grid(-1, 1, 128), build_grid(-1, 1, 256)
    cert = analysis.boundary_envelope_certificate(coarse.delta**0.5, coarse, 0.25,
                                                  refined=(fine.delta**0.5, fine))
    assert not cert.passed
    with pytest.raises(ValueError):
        analysis.envelope_constants(coarse.delta, coarse, 0.25, exclusion=0)


def test_entropy_and_weak_form(canonical_limit, canonical128):
    problem, op = canonical128
    ent = analysis.entropy_certificate(canonical_limit, problem, op)
    assert ent.passed and analysis.ENTROPY_LHS_NOTE in ent.notes
    assert analysis.weak_form_certificate(canonical_limit, problem, op).passed
    assert not analysis.entropy_certificate(canonical_limit.values + 0.1, problem, op).passed


def test_uniqueness_gap(canonical_limit, canonical128):
    _, op = canonical128
    u = canonical_limit.values
    assert analysis.uniqueness_gap(u, u, 1.0, op) == 0.0
    assert analysis.uniqueness_gap(u, u + 0.01, 1.0, op) > 0
    # truncation caps the gap
    big = analysis.uniqueness_gap(u, u + 10, 1.0, op)
    assert big == pytest.approx(analysis.uniqueness_gap(u, u + 1, 1.0, op))


def test_l2_apriori(canonical_limit, canonical128):
    _, op = canonical128
    assert analysis.l2_apriori_certificate(canonical_limit, op).passed


def test_random_test_functions_vanish_near_boundary(rng):
    g = build_grid(0, 1, 32)
    for phi in analysis.random_test_functions(g, 5, rng):
        assert not np.any(phi[:2]) and not np.any(phi[-2:])
        assert np.max(np.abs(phi)) == pytest.approx(1.0)


def test_hardy_sobolev():
    g = build_grid(-1, 1, 64)
    cert = analysis.hardy_sobolev_certificate(analysis.random_bumps(6, 3), 0.25, 0.5, g)
    assert cert.passed
    assert cert.data["n_cells_refined"] == 128
    with pytest.raises(analysis.RegimeError):
        analysis.hardy_sobolev_certificate(analysis.random_bumps(2, 0), 0.8, 0.9, g)


def test_getoor_certificate_is_interval_invariant():
    from fracsing.operator import assemble_operator
    a = analysis.getoor_certificate(assemble_operator(build_grid(-1, 1, 128), 0.3))
    b = analysis.getoor_certificate(assemble_operator(build_grid(2, 7, 128), 0.3))
    assert a.passed and b.passed
    assert a.data["max_deviation"] == pytest.approx(b.data["max_deviation"], rel=1e-8)
    assert math.isclose(a.data["exact"], analysis.getoor_constant(0.3))

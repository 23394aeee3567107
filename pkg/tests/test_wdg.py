"""Tests for the two-point gradient maps and their certified constants."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from wdgopt import problems
from wdgopt.wdg import (
    AVF_NODES,
    PlWdgParams,
    SumWdg,
    WdgKind,
    WdgParams,
    avf_quadrature,
    eval_wdg,
    is_explicit,
    is_strict,
    kind_key,
    params_for,
    parse_kind,
    pl_params_for,
    pl_wdg_params,
    wdg_params,
)

ALL_KINDS = list(WdgKind)


def _pairs(f, n, seed):
    rng = np.random.default_rng(seed)
    lo, hi = f.bounds
    pts = rng.uniform(lo, hi, size=(3 * n, f.dim))
    if f.member is not None:
        pts = pts[f.member(pts)]
    assert len(pts) >= 2 * n
    return pts[:n], pts[n : 2 * n]


def test_param_triples_exact():
    L, mu, d = 0.4, 0.004, 2
    assert wdg_params(WdgKind.EXPLICIT_EULER, L, mu) == WdgParams(L / 2, mu / 2, 0.0)
    assert wdg_params(WdgKind.IMPLICIT_EULER, L, mu) == WdgParams(0.0, 0.0, mu / 2)
    assert wdg_params(WdgKind.MIDPOINT, L, mu) == WdgParams((L + mu) / 8, mu / 4, mu / 4)
    assert wdg_params(WdgKind.AVF, L, mu) == WdgParams(L / 6 + mu / 12, mu / 4, mu / 4)
    assert wdg_params(WdgKind.GONZALEZ, L, mu) == WdgParams((L + mu) / 8 + (L - mu) ** 2 / (16 * mu), mu / 4, 0.0)
    assert wdg_params(WdgKind.ITOH_ABE, L, mu, d) == WdgParams(d * L**2 / mu - mu / 4, mu / 2, -mu / 4)


def test_implicit_euler_params_allow_zero_mu():
    assert wdg_params(WdgKind.IMPLICIT_EULER, np.inf, 0.0) == WdgParams(0.0, 0.0, 0.0)


def test_param_preconditions():
    with pytest.raises(ValueError, match="mu > 0"):
        wdg_params(WdgKind.GONZALEZ, 1.0, 0.0)
    with pytest.raises(ValueError, match="mu > 0"):
        wdg_params(WdgKind.ITOH_ABE, 1.0, 0.0, 2)
    with pytest.raises(ValueError, match="dimension"):
        wdg_params(WdgKind.ITOH_ABE, 1.0, 0.5)
    with pytest.raises(ValueError, match="finite"):
        wdg_params(WdgKind.EXPLICIT_EULER, np.inf, 0.0)


def test_sum_params_add_componentwise():
    a = wdg_params(WdgKind.EXPLICIT_EULER, 1.0, 0.2)
    b = wdg_params(WdgKind.IMPLICIT_EULER, 1.0, 0.6)
    assert a + b == WdgParams(0.5, 0.1, 0.3)
    same = wdg_params(SumWdg(WdgKind.EXPLICIT_EULER, WdgKind.IMPLICIT_EULER), 1.0, 0.2)
    assert same == wdg_params(WdgKind.EXPLICIT_EULER, 1.0, 0.2) + wdg_params(WdgKind.IMPLICIT_EULER, 1.0, 0.2)


def test_composite_params_use_part_metadata():
    fc = problems.composite_2d()
    p = params_for(fc, SumWdg(WdgKind.EXPLICIT_EULER, WdgKind.IMPLICIT_EULER))
    assert p == WdgParams(0.5, 0.05, 0.25)


def test_params_validation():
    with pytest.raises(ValueError, match="alpha"):
        WdgParams(-0.1, 0.0, 0.0)
    with pytest.raises(ValueError, match="beta"):
        WdgParams(0.0, -0.2, 0.1)
    with pytest.raises(ValueError):
        PlWdgParams(-1.0, 0.0)


def test_pl_param_pairs():
    L = 8.0
    assert pl_wdg_params(WdgKind.EXPLICIT_EULER, L) == PlWdgParams(L / 2, 0.0)
    assert pl_wdg_params(WdgKind.IMPLICIT_EULER, L) == PlWdgParams(L / 2, L)
    assert pl_wdg_params(WdgKind.MIDPOINT, L) == PlWdgParams(L / 8, L / 2)
    assert pl_wdg_params(WdgKind.AVF, L) == PlWdgParams(0.0, L / 2)
    assert pl_wdg_params(WdgKind.GONZALEZ, L) == PlWdgParams(0.0, 5 * L / 8)
    assert pl_wdg_params(WdgKind.ITOH_ABE, L, d=4) == PlWdgParams(0.0, 2 * L)


def test_pl_params_reject_sum():
    with pytest.raises(ValueError, match="sum"):
        pl_wdg_params(SumWdg(WdgKind.EXPLICIT_EULER, WdgKind.IMPLICIT_EULER), 1.0)


@pytest.mark.parametrize("kind", ALL_KINDS, ids=lambda k: k.value)
@pytest.mark.parametrize(
    "f", [problems.quadratic_2d(), problems.quartic_2d(), problems.pl_sine()], ids=lambda f: f.name
)
def test_diagonal_consistency(kind, f):
    x, _ = _pairs(f, 1000, seed=21)
    g = eval_wdg(kind, f, x, x)
    ref = f.grad(x)
    err = np.linalg.norm(g - ref, axis=-1)
    assert np.all(err <= 1e-9 * (1 + np.linalg.norm(ref, axis=-1)))


def test_midpoint_family_coincides_on_quadratics():
    f = problems.quadratic_2d()
    Q, b, _ = f.quad_terms
    y, z = _pairs(f, 10_000, seed=22)
    expected = 0.5 * (y + z) @ Q + b
    for kind in (WdgKind.MIDPOINT, WdgKind.AVF, WdgKind.GONZALEZ):
        got = eval_wdg(kind, f, y, z)
        assert np.max(np.abs(got - expected)) <= 1e-12


def test_itoh_abe_hand_example():
    f = problems.make_quadratic(np.eye(2))  # (x1^2 + x2^2)/2
    g = eval_wdg(WdgKind.ITOH_ABE, f, np.array([1.0, 1.0]), np.array([0.0, 0.0]))
    # first coordinate: (f(1,0) - f(0,0))/1 = 0.5; second: (f(1,1) - f(1,0))/1 = 0.5
    np.testing.assert_allclose(g, [0.5, 0.5])


def test_itoh_abe_sweep_order():
    # off-diagonal coupling makes the sweep order visible
    f = problems.make_quadratic(np.array([[1.0, 0.5], [0.5, 1.0]]))
    y = np.array([1.0, 2.0])
    z = np.array([-1.0, 0.5])
    g = eval_wdg(WdgKind.ITOH_ABE, f, y, z)
    d1 = (f.value(np.array([1.0, 0.5])) - f.value(z)) / (y[0] - z[0])
    d2 = (f.value(y) - f.value(np.array([1.0, 0.5]))) / (y[1] - z[1])
    np.testing.assert_allclose(g, [d1, d2], atol=1e-14)


def test_avf_single_node_exact_on_quadratics():
    f = problems.quadratic_2d()
    Q, b, _ = f.quad_terms
    y, z = _pairs(f, 2000, seed=23)
    got = avf_quadrature(f, y, z, nodes=1)
    expected = 0.5 * (y + z) @ Q + b
    assert np.max(np.abs(got - expected)) <= 1e-13


def test_avf_two_nodes_exact_on_quartic():
    f = problems.quartic_2d()
    y, z = _pairs(f, 2000, seed=24)
    got = avf_quadrature(f, y, z, nodes=2)
    ref = avf_quadrature(f, y, z, nodes=64)
    assert np.max(np.abs(got - ref)) <= 1e-12


def test_avf_degenerate_segment():
    f = problems.quartic_2d()
    z = np.array([1.0, -2.0])
    np.testing.assert_allclose(avf_quadrature(f, z, z), f.grad(z))
    with pytest.raises(ValueError, match="nodes"):
        avf_quadrature(f, z, z, nodes=0)


def test_gonzalez_near_coincidence_fallback():
    f = problems.quartic_2d()
    y = np.array([1.0, 2.0])
    z = y + 1e-12
    g = eval_wdg(WdgKind.GONZALEZ, f, y, z)
    np.testing.assert_allclose(g, f.grad(0.5 * (y + z)), atol=1e-12)
    # just above the threshold the value is continuous with the fallback
    z2 = y + 1e-7
    g2 = eval_wdg(WdgKind.GONZALEZ, f, y, z2)
    assert np.linalg.norm(g2 - f.grad(0.5 * (y + z2))) <= 1e-5


def test_itoh_abe_coordinate_fallback():
    f = problems.quadratic_2d()
    y = np.array([1.0, 2.0])
    z = np.array([1.0, -0.5])  # first coordinate coincides
    g = eval_wdg(WdgKind.ITOH_ABE, f, y, z)
    assert g[0] == pytest.approx(f.grad(z)[0], abs=1e-12)
    d2 = (f.value(y) - f.value(np.array([1.0, -0.5]))) / (y[1] - z[1])
    assert g[1] == pytest.approx(d2, abs=1e-14)


def test_sum_eval_routes_parts():
    fc = problems.composite_2d()
    kind = SumWdg(WdgKind.EXPLICIT_EULER, WdgKind.IMPLICIT_EULER)
    y = np.array([0.3, -0.4])
    z = np.array([1.5, 0.2])
    got = eval_wdg(kind, fc, y, z)
    np.testing.assert_allclose(got, fc.f1.grad(z) + fc.f2.grad(y), atol=1e-15)
    with pytest.raises(TypeError, match="Composite"):
        eval_wdg(kind, fc.f1, y, z)


def test_kind_helpers():
    assert parse_kind("sum:ee+ie") == SumWdg(WdgKind.EXPLICIT_EULER, WdgKind.IMPLICIT_EULER)
    assert parse_kind("gonzalez") is WdgKind.GONZALEZ
    assert kind_key(parse_kind("sum:ee+ie")) == "sum:ee+ie"
    with pytest.raises(ValueError, match="unknown weak-gradient kind"):
        parse_kind("xyz")
    assert is_strict(WdgKind.AVF) and not is_strict(WdgKind.MIDPOINT)
    assert is_explicit(WdgKind.EXPLICIT_EULER) and not is_explicit(WdgKind.IMPLICIT_EULER)
    assert is_explicit(SumWdg(WdgKind.EXPLICIT_EULER, WdgKind.EXPLICIT_EULER))
    assert not is_explicit(SumWdg(WdgKind.EXPLICIT_EULER, WdgKind.IMPLICIT_EULER))


def test_pl_params_for_uses_problem_dimension():
    f = problems.pl_sine()
    assert pl_params_for(f, WdgKind.ITOH_ABE) == PlWdgParams(0.0, 8.0)


@given(st.lists(st.floats(-50, 50), min_size=2, max_size=2))
@settings(max_examples=200, deadline=None)
def test_diagonal_consistency_randomized(coords):
    f = problems.quadratic_2d()
    x = np.array(coords)
    np.testing.assert_allclose(eval_wdg(WdgKind.GONZALEZ, f, x, x), f.grad(x), atol=1e-9)
    np.testing.assert_allclose(eval_wdg(WdgKind.ITOH_ABE, f, x, x), f.grad(x), atol=1e-9)


@given(
    st.floats(0.01, 10),
    st.floats(0.001, 5),
    st.floats(-20, 20),
    st.floats(-20, 20),
)
@settings(max_examples=200, deadline=None)
def test_strict_chain_rule_randomized(a, b, y, z):
    # strict kinds satisfy f(y) - f(z) = <g(y, z), y - z> exactly
    f = problems.make_quadratic(np.diag([a, b]))
    yv = np.array([y, -0.5 * y])
    zv = np.array([z, 0.25 * z + 1.0])
    for kind in (WdgKind.AVF, WdgKind.GONZALEZ, WdgKind.ITOH_ABE):
        g = eval_wdg(kind, f, yv, zv)
        lhs = f.value(yv) - f.value(zv)
        rhs = g @ (yv - zv)
        assert abs(lhs - rhs) <= 1e-9 * (1 + abs(lhs))


def test_default_node_count_is_declared():
    assert AVF_NODES == 8

"""Tests for the objective catalog: metadata exactness and sampled inequalities."""

import numpy as np
import pytest

from wdgopt import problems

RNG = np.random.default_rng(1234)

# frozen oracle values (re-derived by the oracles below)
QUADRATIC_XSTAR = np.array([1.2125, -1.2875])
QUADRATIC_FSTAR = -0.0068125
QUARTIC_LEVELSET_L = 5.169758214849124
PL_SINE_MU = 0.17553098598906458


def _sample_domain(f, n, rng):
    lo, hi = f.bounds
    pts = rng.uniform(lo, hi, size=(2 * n + 64, f.dim))
    if f.member is not None:
        pts = pts[f.member(pts)]
    while len(pts) < n:
        extra = rng.uniform(lo, hi, size=(n, f.dim))
        if f.member is not None:
            extra = extra[f.member(extra)]
        pts = np.concatenate([pts, extra])
    return pts[:n]


def catalog():
    return [problems.quadratic_2d(), problems.quartic_2d(), problems.pl_sine(), problems.composite_2d()]


def test_identity_quadratic_metadata():
    f = problems.make_quadratic(np.eye(2), c=3.0)
    assert f.smoothness == 1.0
    assert f.strong_convexity == 1.0
    np.testing.assert_allclose(f.x_star, [0.0, 0.0])
    assert f.f_star == 3.0


def test_quadratic_direct_evaluation():
    f = problems.make_quadratic(np.diag([1.0, 2.0]))
    assert f.value(np.array([1.0, 0.0])) == 0.5


def test_quadratic_rejects_bad_matrices():
    with pytest.raises(ValueError, match="symmetric"):
        problems.make_quadratic(np.array([[1.0, 0.5], [0.0, 1.0]]))
    with pytest.raises(ValueError, match="semidefinite"):
        problems.make_quadratic(np.array([[1.0, 0.0], [0.0, -0.5]]))


def test_quadratic_2d_hessian_by_finite_differences():
    f = problems.quadratic_2d()
    x = np.array([0.7, -1.3])
    h = 1e-6
    hess = np.empty((2, 2))
    for j in range(2):
        e = np.zeros(2)
        e[j] = h
        hess[:, j] = (f.grad(x + e) - f.grad(x - e)) / (2 * h)
    np.testing.assert_allclose(hess, [[0.202, 0.198], [0.198, 0.202]], atol=1e-9)


def test_quadratic_2d_constants_match_eigenvalues():
    f = problems.quadratic_2d()
    w = np.linalg.eigvalsh(f.quad_terms[0])
    assert f.smoothness == 0.4
    assert f.strong_convexity == 0.004
    np.testing.assert_allclose(w, [0.004, 0.4], atol=1e-15)


def test_quadratic_2d_optimum():
    f = problems.quadratic_2d()
    # oracle: independent linear solve of the stationarity system
    Q, b, _ = f.quad_terms
    oracle = np.linalg.solve(Q, -b)
    np.testing.assert_allclose(oracle, QUADRATIC_XSTAR, atol=1e-12)
    np.testing.assert_allclose(f.x_star, QUADRATIC_XSTAR, atol=1e-12)
    assert abs(f.f_star - QUADRATIC_FSTAR) < 1e-15
    assert np.linalg.norm(f.grad(f.x_star)) < 1e-14


def test_quartic_values():
    f = problems.quartic_2d()
    assert f.value(np.array([2.0, 4.0])) == pytest.approx(1.856, abs=1e-15)
    np.testing.assert_allclose(f.grad(np.zeros(2)), [0.0, 0.0])
    assert f.f_star == 0.0


def test_quartic_level_set_smoothness():
    f = problems.quartic_2d()
    assert f.smoothness == pytest.approx(QUARTIC_LEVELSET_L, abs=1e-12)
    # closed form: Hessian is diagonal, max over the level-set boundary
    f0 = 1.856
    assert f.smoothness == pytest.approx(max(1.2 * np.sqrt(10 * f0), 0.012 * np.sqrt(1000 * f0)), abs=1e-12)
    # oracle: grid search of the Hessian spectral norm over the level set
    lo, hi = f.bounds
    g1 = np.linspace(lo[0], hi[0], 601)
    g2 = np.linspace(lo[1], hi[1], 601)
    X1, X2 = np.meshgrid(g1, g2)
    pts = np.stack([X1.ravel(), X2.ravel()], axis=-1)
    inside = f.member(pts)
    hess_norm = np.maximum(1.2 * pts[:, 0] ** 2, 0.012 * pts[:, 1] ** 2)[inside]
    grid_max = hess_norm.max()
    assert grid_max <= f.smoothness * (1 + 1e-12)
    assert grid_max >= f.smoothness * (1 - 5e-3)


def test_quartic_even_symmetry():
    f = problems.quartic_2d()
    x = _sample_domain(f, 500, np.random.default_rng(5))
    np.testing.assert_allclose(f.value(-x), f.value(x), rtol=1e-14)
    np.testing.assert_allclose(f.grad(-x), -f.grad(x), rtol=1e-14)


def test_pl_sine_basics():
    f = problems.pl_sine()
    assert f.value(np.zeros(1)) == 0.0
    assert f.grad(np.zeros(1))[0] == 0.0
    # L oracle: max of f''(x) = 2 + 6 cos(2x) over a fine grid
    g = np.linspace(-10, 10, 400001)
    assert np.max(2 + 6 * np.cos(2 * g)) <= 8.0
    assert f.smoothness == 8.0


def test_pl_constant_matches_grid_oracle():
    f = problems.pl_sine()
    assert f.pl_constant == pytest.approx(PL_SINE_MU, abs=1e-15)
    # independent oracle with a shifted, coarser grid still brackets the value
    g = np.arange(-10.0 + 3.3e-5, 10.0, 1e-4)
    g = g[np.abs(g) > 1e-8]
    ratio = (2 * g + 3 * np.sin(2 * g)) ** 2 / (2 * (g * g + 3 * np.sin(g) ** 2))
    assert np.min(ratio) == pytest.approx(f.pl_constant, rel=1e-6)


def test_composite_additivity():
    f1 = problems.make_quadratic(np.diag([1.0, 0.5]), np.array([0.1, -0.3]))
    f2 = problems.quartic_2d()
    fc = problems.make_composite(f1, f2)
    x = _sample_domain(fc, 100, np.random.default_rng(11))
    np.testing.assert_allclose(fc.value(x), f1.value(x) + f2.value(x), atol=1e-12)
    np.testing.assert_allclose(fc.grad(x), f1.grad(x) + f2.grad(x), atol=1e-12)


def test_composite_symmetric_halves():
    half = problems.make_quadratic(np.eye(1))  # x^2/2 each
    fc = problems.make_composite(half, half)
    x = np.array([[3.0], [-2.0]])
    np.testing.assert_allclose(fc.value(x), x[:, 0] ** 2)
    np.testing.assert_allclose(fc.grad(x), 2 * x)


def test_composite_strong_convexity_adds():
    f1 = problems.make_quadratic(np.eye(2))  # L1 = mu1 = 1
    f2 = problems.make_quadratic(2.0 * np.eye(2))  # mu2 = 2
    fc = problems.make_composite(f1, f2)
    assert fc.strong_convexity == pytest.approx(3.0)
    # sampled strong-convexity inequality with the summed modulus
    rng = np.random.default_rng(17)
    x = rng.uniform(-5, 5, size=(2000, 2))
    y = rng.uniform(-5, 5, size=(2000, 2))
    lhs = fc.value(y) - fc.value(x) - np.einsum("ij,ij->i", fc.grad(x), y - x)
    rhs = 0.5 * fc.strong_convexity * np.einsum("ij,ij->i", y - x, y - x)
    assert np.all(lhs >= rhs - 1e-9 * (1 + np.abs(lhs)))


def test_composite_dimension_mismatch():
    with pytest.raises(ValueError, match="dimension"):
        problems.make_composite(problems.make_quadratic(np.eye(2)), problems.make_quadratic(np.eye(3)))


def test_composite_2d_part_metadata():
    fc = problems.composite_2d()
    assert fc.smoothness_1 == pytest.approx(1.0)
    assert fc.strong_convexity_1 == pytest.approx(0.1)
    assert fc.strong_convexity_2 == pytest.approx(0.5)
    assert fc.optimum is not None


@pytest.mark.parametrize("f", catalog(), ids=lambda f: f.name)
def test_sampled_smoothness(f):
    rng = np.random.default_rng(99)
    x = _sample_domain(f, 10_000, rng)
    y = _sample_domain(f, 10_000, rng)
    gap = np.linalg.norm(f.grad(y) - f.grad(x), axis=-1)
    dist = np.linalg.norm(y - x, axis=-1)
    assert np.all(gap <= f.smoothness * dist * (1 + 1e-9) + 1e-12)


@pytest.mark.parametrize("f", [problems.quadratic_2d(), problems.composite_2d()], ids=lambda f: f.name)
def test_sampled_strong_convexity(f):
    rng = np.random.default_rng(98)
    x = _sample_domain(f, 10_000, rng)
    y = _sample_domain(f, 10_000, rng)
    lhs = f.value(y) - f.value(x) - np.einsum("ij,ij->i", f.grad(x), y - x)
    rhs = 0.5 * f.strong_convexity * np.einsum("ij,ij->i", y - x, y - x)
    scale = 1 + np.abs(f.value(y)) + np.abs(f.value(x))
    assert np.all(lhs - rhs >= -1e-9 * scale)


@pytest.mark.parametrize("f", catalog(), ids=lambda f: f.name)
def test_gradient_matches_finite_differences(f):
    rng = np.random.default_rng(7)
    pts = _sample_domain(f, 20, rng)
    for x in pts:
        h = 1e-6 * (1 + np.linalg.norm(x))
        fd = np.empty(f.dim)
        for i in range(f.dim):
            e = np.zeros(f.dim)
            e[i] = h
            fd[i] = (f.value(x + e) - f.value(x - e)) / (2 * h)
        g = f.grad(x)
        assert np.linalg.norm(fd - g) <= 1e-6 * (1 + np.linalg.norm(g))


@pytest.mark.parametrize("f", catalog(), ids=lambda f: f.name)
def test_declared_optimum_is_stationary(f):
    if f.optimum is None:
        pytest.skip("no optimum")
    assert np.linalg.norm(f.grad(f.x_star)) <= 1e-10


def test_quadratic_file_roundtrip(tmp_path):
    path = tmp_path / "prob.txt"
    path.write_text("2\n1.0 0.2\n0.2 2.0\n0.5 -0.5\n1.25\n")
    f = problems.load_quadratic(path)
    assert f.dim == 2
    Q = np.array([[1.0, 0.2], [0.2, 2.0]])
    x = np.array([0.3, -0.7])
    assert f.value(x) == pytest.approx(0.5 * x @ Q @ x + np.array([0.5, -0.5]) @ x + 1.25)
    assert problems.get_problem(f"quad:{path}").dim == 2


def test_quadratic_file_rejects_garbage(tmp_path):
    path = tmp_path / "bad.txt"
    path.write_text("2 1 0 0\n")
    with pytest.raises(ValueError, match="expected"):
        problems.load_quadratic(path)


def test_get_problem_unknown_key():
    with pytest.raises(ValueError, match="unknown problem"):
        problems.get_problem("nope")

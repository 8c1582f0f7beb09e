import math

import numpy as np
import pytest
from scipy.optimize import bisect

from anisofrac.errors import DomainError, ParameterError
from anisofrac.geometry import (build_sphere_grid, cbl_distance, ellipsoid_contains, ellipsoid_volume,
                                inclusion_constant, make_anisotropy, orbit_radius, project_to_sphere,
                                quasi_norm, quasi_triangle_constant, scale_map, set_inclusion_check)

ANISOTROPIES = [(2, 2), (4 / 3, 4), (2, 4), (1, 2, 3)]


def test_derived_quantities():
    A = make_anisotropy((2, 2))
    assert (A.c, A.b_max, A.mu) == (2, 2, 2)
    assert make_anisotropy((4 / 3, 4)).c == pytest.approx(2, abs=1e-15)
    B = make_anisotropy((2, 4))
    assert B.c == pytest.approx(1.5)
    assert np.allclose(B.beta_star, (1.5, 3))
    assert np.sum(2 / B.beta_star) == pytest.approx(2)
    assert make_anisotropy((2, 2), mu_override=1).mu == 1


def test_rejects_nonpositive_exponents():
    with pytest.raises(ParameterError):
        make_anisotropy((2, 0))


def test_quasi_norm_examples():
    assert quasi_norm([3, 4], make_anisotropy((2, 2))) == pytest.approx(5)
    B = make_anisotropy((2, 4))
    assert quasi_norm([1, 1], B) == pytest.approx(math.sqrt(2))
    assert quasi_norm([2, math.sqrt(2)], B) == pytest.approx(2 * quasi_norm([1, 1], B), rel=1e-15)


@pytest.mark.parametrize("beta", ANISOTROPIES)
def test_quasi_norm_homogeneity_and_symmetry(beta):
    A = make_anisotropy(beta)
    rng = np.random.default_rng(1)
    x = rng.standard_normal((500, A.n))
    r = 10.0 ** rng.uniform(-3, 3, 500)
    lhs = quasi_norm(scale_map(x, A, r), A)
    assert np.allclose(lhs, r * quasi_norm(x, A), rtol=1e-13, atol=0)
    flips = rng.choice([-1.0, 1.0], size=x.shape)
    assert np.array_equal(quasi_norm(x * flips, A), quasi_norm(x, A))


def test_scale_map_examples():
    B = make_anisotropy((2, 4))
    assert np.allclose(scale_map([1, 1], B, 2.0), [2, 2 ** 0.5], rtol=1e-15)
    assert np.allclose(scale_map(scale_map([1, 1], B, 2.0), B, 0.5), [1, 1], rtol=1e-15)
    x = np.array([0.3, -1.7])
    assert np.array_equal(scale_map(x, B, 1.0), x)
    assert quasi_norm(scale_map([1, 1], B, 3.0), B, 2) ** 2 == pytest.approx(3 ** 4 * quasi_norm([1, 1], B, 2) ** 2)
    with pytest.raises(ParameterError):
        scale_map(x, B, 0.0)


def _cbl_oracle(x, A):
    bs = A.beta_star
    return bisect(lambda r: np.sum(np.asarray(x) ** 2 / r ** (4 / bs)) - 1, 1e-8, 1e8, xtol=1e-14, rtol=1e-15)


def test_cbl_examples():
    assert cbl_distance([3, 4], make_anisotropy((2, 2))) == pytest.approx(5, rel=1e-13)
    A = make_anisotropy((4 / 3, 4))
    assert cbl_distance([1, 0], A) == pytest.approx(1, rel=1e-13)
    r = cbl_distance([1, 1], A)
    assert r == pytest.approx(_cbl_oracle([1, 1], A), abs=1e-10)
    assert abs(1 / r ** 3 + 1 / r - 1) < 1e-12
    assert cbl_distance([0, 0], A) == 0


@pytest.mark.parametrize("beta", ANISOTROPIES)
def test_cbl_residual_and_scaling(beta):
    A = make_anisotropy(beta)
    rng = np.random.default_rng(2)
    x = rng.standard_normal((400, A.n)) * 10.0 ** rng.uniform(-3, 3, (400, 1))
    r = cbl_distance(x, A)
    res = np.sum(x ** 2 / r[:, None] ** (4 / A.beta_star), axis=1) - 1
    assert np.max(np.abs(res)) < 1e-12
    k = 3.7
    expo = A.c / A.n
    assert np.allclose(cbl_distance(scale_map(x, A, k), A), k ** expo * r, rtol=1e-10)
    # comparability with the quasi-norm on random points of both scales
    ratio = r / quasi_norm(x, A) ** (A.c / A.n) if abs(A.c - A.n) > 1e-12 else r / quasi_norm(x, A)
    assert np.isfinite(ratio).all() and ratio.max() / ratio.min() < 50


def test_project_to_sphere_examples_and_roundtrip():
    A = make_anisotropy((2, 2))
    rad, om = project_to_sphere([0, 2], A)
    assert rad == pytest.approx(2) and np.allclose(om, [0, 1])
    B = make_anisotropy((4 / 3, 4))
    rng = np.random.default_rng(3)
    x = rng.standard_normal((1000, 2)) * 10.0 ** rng.uniform(-2, 2, (1000, 1))
    rad, om = project_to_sphere(x, B)
    assert np.max(np.abs(quasi_norm(om, B, B.mu) - 1)) < 1e-12
    assert np.max(np.abs(scale_map(om, B, rad) - x) / np.abs(x).max(axis=1, keepdims=True)) < 1e-12
    with pytest.raises(DomainError):
        project_to_sphere([0, 0], B)


def test_orbit_radius_matches_bisection():
    p = make_anisotropy((4 / 3, 4)).exponents
    rng = np.random.default_rng(4)
    z = rng.standard_normal((50, 2)) * 10.0 ** rng.uniform(-3, 3, (50, 1))
    s = orbit_radius(z, p)
    for zi, si in zip(z, s):
        ref = bisect(lambda t: np.sum(zi ** 2 / t ** (2 * p)) - 1, 1e-12, 1e12, xtol=1e-300, rtol=1e-15)
        assert si == pytest.approx(ref, rel=1e-12)


def test_ellipsoid_examples():
    A = make_anisotropy((2, 2))
    rng = np.random.default_rng(5)
    y = rng.uniform(-2, 2, (1000, 2))
    assert np.array_equal(ellipsoid_contains([0, 0], 1.3, A, y), np.linalg.norm(y, axis=1) < 1.3)
    assert ellipsoid_contains([0, 0], 1.0, A, [0, 0])
    assert ellipsoid_volume(3, A) == pytest.approx(9 * math.pi)
    assert ellipsoid_volume(2, make_anisotropy((2, 4))) == pytest.approx(2 * math.sqrt(2) * math.pi)


@pytest.mark.parametrize("beta", ANISOTROPIES)
def test_volume_scaling_and_inclusions(beta):
    A = make_anisotropy(beta)
    for r in (0.3, 1.0, 7.0):
        assert abs(ellipsoid_volume(2 * r, A) / ellipsoid_volume(r, A) - 2 ** A.c) < 1e-12
    rep = set_inclusion_check(A, 0.8, 10_000, seed=6, center=np.full(A.n, 0.25))
    assert rep["inner_violations"] == 0 and rep["outer_violations"] == 0
    assert rep["inner_hits"] > 1000 and rep["outer_hits"] > 1000
    assert inclusion_constant(A) >= 1


def test_sphere_grid_isotropic_length():
    A = make_anisotropy((2, 2), mu_override=1)
    g = build_sphere_grid(A, 128)
    assert np.allclose(np.linalg.norm(g.points, axis=1), 1, atol=1e-14)
    assert np.sum(g.weights) == pytest.approx(2 * math.pi, rel=5e-3)


@pytest.mark.parametrize("beta", [(4 / 3, 4), (2, 4)])
def test_sphere_grid_symmetry_and_refinement(beta):
    A = make_anisotropy(beta)
    g1, g2 = build_sphere_grid(A, 128), build_sphere_grid(A, 256)
    assert np.max(np.abs(quasi_norm(g1.points, A, A.mu) - 1)) < 1e-12
    assert np.all(g1.weights > 0)
    for flip in ([-1, 1], [1, -1]):
        d = np.linalg.norm(g1.points[:, None, :] * flip - g1.points[None, :, :], axis=2)
        assert d.min(axis=1).max() < 1e-12
    assert abs(np.sum(g2.weights) / np.sum(g1.weights) - 1) < 0.01


def test_sphere_grid_three_dimensional():
    A = make_anisotropy((1, 2, 3))
    g = build_sphere_grid(A, 16)
    assert np.max(np.abs(quasi_norm(g.points, A, A.mu) - 1)) < 1e-12
    assert np.all(g.weights > 0)


def test_sphere_grid_too_coarse():
    with pytest.raises(ParameterError):
        build_sphere_grid(make_anisotropy((2, 2)), 4)


@pytest.mark.parametrize("beta", ANISOTROPIES)
def test_quasi_triangle(beta):
    A = make_anisotropy(beta)
    est, bound = quasi_triangle_constant(A, 5000, seed=7)
    assert 1 <= est <= bound
    assert quasi_triangle_constant(A, 5000, seed=7) == (est, bound)
    if beta == (2, 2):
        assert est <= 1 + 1e-9


def test_sphere_norm_equivalence():
    A1, A2 = make_anisotropy((2, 2)), make_anisotropy((4 / 3, 4))
    g = build_sphere_grid(A2, 4096)
    vals = quasi_norm(g.points, A1)
    assert np.all(vals > 0) and vals.max() / vals.min() < 100

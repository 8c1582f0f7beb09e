import math

import numpy as np
import pytest

from anisofrac.barrier import (barrier, barrier_gradient, barrier_hessian, barrier_sweep, cone_complement_measure,
                               cone_membership, default_alpha_grid, default_gamma_grid, delta0_threshold,
                               gk_truncation, make_cone)
from anisofrac.errors import DomainError, ParameterError
from anisofrac.geometry import build_sphere_grid, make_anisotropy, quasi_norm, scale_map

ANIS = [(2, 2), (4 / 3, 4), (2, 4)]


def fd_hessian(f, x, h=1e-5):
    n = x.size
    H = np.empty((n, n))
    for i in range(n):
        for j in range(n):
            ei, ej = np.eye(n)[i] * h, np.eye(n)[j] * h
            H[i, j] = (f(x + ei + ej) - f(x + ei - ej) - f(x - ei + ej) + f(x - ei - ej)) / (4 * h * h)
    return H


def test_barrier_values_and_homogeneity():
    A = make_anisotropy((2, 2))
    B = barrier(A, 0.3)
    assert B([1.0, 0.0]) == pytest.approx(1.0)
    x = np.array([0.4, -1.3])
    assert B(x) == pytest.approx(np.sum(x ** 4) ** (-0.3 / 4), rel=1e-15)
    C = make_anisotropy((4 / 3, 4))
    Bc = barrier(C, 0.25)
    rng = np.random.default_rng(0)
    e = rng.standard_normal((100, 2))
    om = e * (1 / quasi_norm(e, C, C.mu) ** (1 / C.mu))[:, None] ** C.exponents
    assert np.allclose(Bc(om), 1.0, atol=1e-12)
    r = 10 ** rng.uniform(-2, 2, 100)
    assert np.allclose(Bc(scale_map(om * 0.7, C, r)), r ** -0.25 * Bc(om * 0.7), rtol=1e-10)
    with pytest.raises(ParameterError):
        barrier(C, 0.0)


@pytest.mark.parametrize("beta", ANIS)
def test_hessian_and_gradient_match_finite_differences(beta):
    A = make_anisotropy(beta)
    B = barrier(A, 0.4)
    rng = np.random.default_rng(1)
    for _ in range(30):
        x = rng.uniform(0.3, 1.5, A.n) * rng.choice([-1, 1], A.n)
        H = barrier_hessian(B, x)
        assert np.array_equal(H, H.T)
        Hfd = fd_hessian(lambda z: B(z), x)
        assert np.max(np.abs(H - Hfd)) / np.max(np.abs(H)) < 1e-5
        g = barrier_gradient(B, x)
        gfd = np.array([(B(x + h) - B(x - h)) / 2e-6 for h in np.eye(A.n) * 1e-6])
        assert np.max(np.abs(g - gfd)) / np.max(np.abs(g)) < 1e-6


def test_isotropic_hessian_by_hand():
    A = make_anisotropy((2, 2))
    g = 0.3
    B = barrier(A, g)
    x = np.array([0.7, -0.4])
    S = np.sum(x ** 4)
    # u = S^{−g/4}; ∂_i u = −g x_i³ S^{−g/4−1}
    H = np.empty((2, 2))
    for i in range(2):
        for j in range(2):
            H[i, j] = g * (g + 4) * x[i] ** 3 * x[j] ** 3 * S ** (-g / 4 - 2)
        H[i, i] -= 3 * g * x[i] ** 2 * S ** (-g / 4 - 1)
    assert np.allclose(barrier_hessian(B, x), H, rtol=1e-13)
    with pytest.raises(DomainError):
        barrier_hessian(B, [0.0, 0.0])


def test_cone_membership_basics():
    A = make_anisotropy((4 / 3, 4))
    C = make_cone([0.8, 0.5], A, 0.3)
    x = np.array(C.apex)
    assert not cone_membership(C, x)
    d = C.d
    orth = np.array([-d[1] * x[1], d[0] * x[0]])
    assert cone_membership(C, orth)
    rng = np.random.default_rng(2)
    y = rng.standard_normal((10_000, 2))
    assert np.array_equal(cone_membership(C, y), cone_membership(C, -y))
    assert np.all(C.d > 0)
    with pytest.raises(ParameterError):
        make_cone([1, 0], A, 1.0)


def _brute_complement(A, delta, apex, m=200_000):
    t = np.linspace(0, 2 * np.pi, m + 1)
    e = np.stack([np.cos(t), np.sin(t)], axis=1)
    om = e * (1 / quasi_norm(e, A, A.mu) ** (1 / A.mu))[:, None] ** A.exponents
    seg = np.linalg.norm(np.diff(om, axis=0), axis=1)
    mid = 0.5 * (om[1:] + om[:-1])
    return float(np.sum(seg[~cone_membership(make_cone(apex, A, delta), mid)]))


def test_cone_complement_isotropic_closed_form():
    A = make_anisotropy((2, 2), mu_override=1)
    grid = build_sphere_grid(A, 512)
    for delta in (0.1, 0.5, 0.9):
        exact = 4 * math.acos(1 - delta)
        vals = [cone_complement_measure(A, delta, grid, p) for p in ([1, 0], [0.6, 0.8], [-0.3, 0.2])]
        assert all(abs(v / exact - 1) < 0.02 for v in vals)
        assert (max(vals) - min(vals)) / exact < 0.02


def test_cone_complement_orientation_and_brute_force():
    A = make_anisotropy((4 / 3, 4))
    grid = build_sphere_grid(A, 512)
    apex = [0.7, 0.6]
    vals = []
    for delta in (0.1, 0.5, 0.9):
        v = cone_complement_measure(A, delta, grid, apex)
        assert v == pytest.approx(_brute_complement(A, delta, apex), rel=0.02)
        vals.append(v)
    assert vals[0] <= vals[1] <= vals[2]
    with pytest.raises(ParameterError):
        cone_complement_measure(A, 0.5, build_sphere_grid(A, 32), apex)


def test_delta0_threshold():
    A = make_anisotropy((2, 2), mu_override=1)
    grid = build_sphere_grid(A, 64)
    d0 = delta0_threshold(A, grid, 1.0, [0.01, 0.05, 0.1, 0.3, 0.6])
    # bound c0·2π/4 = π/2 = 4 arccos(1 − δ)  ⇒  δ ≤ 1 − cos(π/8) ≈ 0.076
    assert d0 == 0.05


def test_sweep_failure_regime_and_table_shape():
    A = make_anisotropy((2, 2))
    grid = build_sphere_grid(A, 16)
    res = barrier_sweep(A, [0.85, 0.9], [1.8], grid, threads=2)
    assert len(res.rows) == 2
    assert all(r.min_value < 0 for r in res.rows)
    assert res.alpha0[1.8] is None
    assert len(res.table()[0]) == 5
    with pytest.raises(ParameterError):
        barrier_sweep(A, [1.0], [0.1], grid)


def test_sweep_deterministic_across_threads():
    A = make_anisotropy((4 / 3, 4))
    grid = build_sphere_grid(A, 16)
    a = barrier_sweep(A, [0.45], [0.1, 0.5], grid, threads=1).table()
    b = barrier_sweep(A, [0.45], [0.1, 0.5], grid, threads=4).table()
    assert a == b


def test_default_grids():
    A = make_anisotropy((4 / 3, 4))
    al = default_alpha_grid(A)
    assert len(al) == 12 and al[0] == pytest.approx(0.25) and al[-1] == pytest.approx(0.49)
    assert default_gamma_grid(A) == pytest.approx([0.05, 0.1, 0.25, 0.5, 1.0, 1.5])


def test_gk_truncation():
    A = make_anisotropy((2, 2), mu_override=1)
    assert gk_truncation(0.5, 0, 0.2, 0.4, A) == 1.0
    assert gk_truncation(2.0, 0, 0.2, 0.4, A) == 0.0
    t = np.geomspace(1e-3, 1e3, 400)
    e = 0.2 + 2 * 0.4
    for k in (1, 3, 6):
        g = gk_truncation(t, k, 0.2, 0.4, A)
        assert np.all(np.diff(g) <= 0)
        assert np.all(g <= np.minimum(2.0 ** (e * k), t ** -e) * (1 + 1e-12))
    assert gk_truncation(0.37, 30, 0.2, 0.4, A) == pytest.approx(0.37 ** -e)
    with pytest.raises(ParameterError):
        gk_truncation(0.0, 1, 0.2, 0.4, A)

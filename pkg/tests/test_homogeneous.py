import math

import numpy as np
import pytest
from scipy.special import gamma as G

from anisofrac.errors import BracketError, DomainError, ParameterError
from anisofrac.geometry import build_sphere_grid, make_anisotropy
from anisofrac.homogeneous import (HomogeneousProfile, assemble_profile_operator, beta_sphere_extrema,
                                   fundamental_solution, gamma_star, harnack_ratio, holder_seminorm_of_psi,
                                   principal_eigenpair, solve_homogeneous_poisson, two_sided_bounds)
from anisofrac.operator import eval_operator, normalization_constant, quasi_power_field

ISO = make_anisotropy((2, 2))
ANISO = make_anisotropy((4 / 3, 4))
N = 64


def riesz_multiplier(n, s, gam):
    mult = 4 ** s * G((gam + 2 * s) / 2) * G((n - gam) / 2) / (G((n - gam - 2 * s) / 2) * G(gam / 2))
    cns = 4 ** s * G(n / 2 + s) / (math.pi ** (n / 2) * abs(G(-s)))
    return mult / cns


@pytest.fixture(scope="module")
def iso_op():
    return assemble_profile_operator(ISO, 0.9, 0.1, build_sphere_grid(ISO, N))


@pytest.fixture(scope="module")
def aniso_op():
    return assemble_profile_operator(ANISO, 0.45, 0.5, build_sphere_grid(ANISO, N))


@pytest.fixture(scope="module")
def iso_fund():
    return fundamental_solution(ISO, 0.9, build_sphere_grid(ISO, N))


@pytest.mark.slow
@pytest.mark.parametrize("beta, alpha, gam", [((2, 2), 0.9, 0.1), ((4 / 3, 4), 0.45, 0.5)])
def test_row_sums_match_direct_quadrature(beta, alpha, gam):
    # consistency error is ~1e-2 at 64 nodes and falls below 1e-3 by 256
    A = make_anisotropy(beta)
    P = assemble_profile_operator(A, alpha, gam, build_sphere_grid(A, 256))
    grid = P.grid
    u = quasi_power_field(A, P.gamma, A.mu)
    L1 = P.apply(np.ones(grid.size))
    for i in np.random.default_rng(0).choice(grid.size, 5, replace=False):
        ref = eval_operator(u, grid.points[i], A, P.alpha).value
        assert abs(L1[i] - ref) / abs(ref) < 1e-3


def test_isotropic_rotation_invariance(iso_op):
    phi = 1 + 0.3 * np.cos(np.arange(N) * 2 * np.pi / N * 3)
    k = N // 4  # quarter turn maps the grid onto itself
    lhs = np.roll(iso_op.apply(phi), k)
    rhs = iso_op.apply(np.roll(phi, k))
    assert np.max(np.abs(lhs - rhs)) / np.max(np.abs(lhs)) < 1e-3


def test_assembly_bitwise_identical_across_threads():
    grid = build_sphere_grid(ANISO, 16)
    a = assemble_profile_operator(ANISO, 0.45, 0.5, grid, threads=1)
    b = assemble_profile_operator(ANISO, 0.45, 0.5, grid, threads=3)
    assert np.array_equal(a.matrix, b.matrix)


def test_poisson_isotropic_matches_riesz():
    A = make_anisotropy((2, 2), mu_override=1)
    P = assemble_profile_operator(A, 0.9, 0.1, build_sphere_grid(A, N))
    sol = solve_homogeneous_poisson(P)
    v = sol.values
    assert np.all(v > 0) and (v.max() - v.min()) / v.max() < 0.05
    exact = 1 / (normalization_constant(A, 0.9) * riesz_multiplier(2, 0.9, 0.1))
    assert np.mean(v) == pytest.approx(exact, rel=1e-3)
    assert np.max(np.abs(P.apply(v) - 1)) < 1e-8 * np.max(np.abs(v))
    assert sol.info["residual"] < 1e-8


def test_poisson_beyond_critical_exponent():
    P = assemble_profile_operator(ISO, 0.9, 0.5, build_sphere_grid(ISO, 32))
    sol = solve_homogeneous_poisson(P)
    assert sol.info["min_value"] < 0 or sol.info["near_critical"]


def test_profile_reproduces_node_values(iso_op):
    sol = solve_homogeneous_poisson(iso_op)
    assert np.allclose(sol(iso_op.grid.points), sol.values, rtol=1e-12)
    with pytest.raises(ParameterError):
        HomogeneousProfile(iso_op.grid, np.ones(3), 0.1)
    with pytest.raises(DomainError):
        HomogeneousProfile(iso_op.grid, -np.ones(N), 0.1, positive=True)


@pytest.mark.parametrize("alpha,tol_frac", [(0.75, 0.10), (0.9, 0.10)])
def test_gamma_star_isotropic_oracle(alpha, tol_frac):
    res = gamma_star(ISO, alpha, build_sphere_grid(ISO, N))
    exact = 2 - 2 * alpha
    assert abs(res.gamma_star - exact) <= tol_frac * exact
    assert 0 < res.gamma_star < ISO.c
    assert res.bracket_hi - res.bracket_lo <= 1e-3
    assert res.eigen_consistent


def test_gamma_star_bracket_errors():
    grid = build_sphere_grid(ISO, 16)
    with pytest.raises(BracketError):
        gamma_star(ISO, 0.9, grid, bracket=(0.5, 1.5), eigen_check=False)
    with pytest.raises(ParameterError):
        gamma_star(ISO, 0.9, grid, bracket=(0.5, 2.5))


def test_fundamental_solution_isotropic(iso_fund):
    Psi = iso_fund
    info = Psi.info
    assert np.all(Psi.values > 0)
    v = Psi.values
    assert (v.max() - v.min()) / v.max() < 0.05
    assert info["m0"] >= 0.95
    lo, hi = beta_sphere_extrema(Psi)
    assert hi == pytest.approx(1.0, abs=1e-6)
    assert info["harmonic_residual"] < 10 * 1e-3
    b = two_sided_bounds(Psi, 1000, seed=1)
    assert b["upper_violation"] <= 1e-6 and b["lower_violation"] <= 1e-6
    assert 1 <= harnack_ratio(Psi) <= 1.1


def test_eigenvector_unique_up_to_scale(iso_op):
    _, v1, _ = principal_eigenpair(iso_op, seed=0)
    _, v2, _ = principal_eigenpair(iso_op, seed=123)
    cos = abs(v1 @ v2) / (np.linalg.norm(v1) * np.linalg.norm(v2))
    assert cos > 1 - 1e-6


def test_holder_seminorm_of_psi(iso_fund):
    a = holder_seminorm_of_psi(iso_fund, 0.5, pairs=10_000, seed=0)
    b = holder_seminorm_of_psi(iso_fund, 0.5, pairs=100_000, seed=0)
    assert abs(b - a) / b < 0.2
    vals = [holder_seminorm_of_psi(iso_fund, t, pairs=20_000, seed=4) for t in (0.2, 0.5, 0.9)]
    assert vals[0] <= vals[1] <= vals[2]
    # on the β-sphere the isotropic profile is constant up to discretization
    assert holder_seminorm_of_psi(iso_fund, 0.5, pairs=20_000, seed=0, domain="sphere") < 0.05
    with pytest.raises(ParameterError):
        holder_seminorm_of_psi(iso_fund, 1.5)


def test_harnack_ratio_requires_positive_profile(iso_op):
    with pytest.raises(DomainError):
        harnack_ratio(HomogeneousProfile(iso_op.grid, np.linspace(-1, 1, N), 0.1))

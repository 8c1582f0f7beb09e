import math

import numpy as np
import pytest
from scipy.special import gamma as G

from anisofrac.barrier import barrier
from anisofrac.errors import DomainError, ParameterError
from anisofrac.geometry import make_anisotropy, scale_map
from anisofrac.operator import (Field, QuadratureConfig, bump_field, constant_field, eval_operator, gaussian_field,
                                homogeneity_identity_check, kernel_integrability_report, normalization_constant,
                                quasi_power_field)

ISO = make_anisotropy((2, 2))
ANISO = make_anisotropy((4 / 3, 4))


def riesz_value(n, s, gam, r):
    """∫ (|x|^{−γ} − |y|^{−γ}) |x − y|^{−n−2s} dy at |x| = r, from the classical multiplier."""
    mult = 4 ** s * G((gam + 2 * s) / 2) * G((n - gam) / 2) / (G((n - gam - 2 * s) / 2) * G(gam / 2))
    cns = 4 ** s * G(n / 2 + s) / (math.pi ** (n / 2) * abs(G(-s)))
    return mult / cns * r ** (-gam - 2 * s)


def test_normalization_constant():
    assert normalization_constant(ISO, 0.5) == pytest.approx(0.5)
    assert normalization_constant(make_anisotropy((2, 4)), 0.4) == pytest.approx(0.1)
    assert normalization_constant(ISO, 1 - 1e-9) == pytest.approx(1e-9)
    for bad in (0.0, 1.0, -0.2):
        with pytest.raises(ParameterError):
            normalization_constant(ISO, bad)


def test_config_invariants():
    with pytest.raises(ParameterError):
        QuadratureConfig(near_radius=2.0, far_cutoff=1.0)
    with pytest.raises(ParameterError):
        QuadratureConfig(rel_tol=0.1)
    with pytest.raises(ParameterError):
        QuadratureConfig(tail_mode="magic")


@pytest.mark.parametrize("A", [ISO, ANISO])
def test_constants_are_annihilated(A):
    r = eval_operator(constant_field(3.0, 2), [0.4, -0.7], A, 0.9 * A.alpha_max)
    assert abs(r.value) < 1e-10
    assert r.value == r.near_part + r.far_part + r.tail_part


@pytest.mark.parametrize("alpha,gam", [(0.5, 0.3), (0.9, 0.5), (0.3, 1.2)])
def test_isotropic_riesz_oracle(alpha, gam):
    u = quasi_power_field(ISO, gam)
    x = np.array([0.6, 0.8])
    r = eval_operator(u, x, ISO, alpha)
    expected = normalization_constant(ISO, alpha) * riesz_value(2, alpha, gam, 1.0)
    assert r.value == pytest.approx(expected, rel=1e-6)
    assert abs(r.value - expected) <= max(10 * r.error_estimate, 1e-7 * abs(expected))
    # two-point log slope of the |x|-exponent
    r2 = eval_operator(u, 2 * x, ISO, alpha)
    slope = math.log(r2.value / r.value) / math.log(2)
    assert slope == pytest.approx(-gam - 2 * alpha, abs=1e-3)


@pytest.mark.parametrize("A", [ISO, ANISO])
def test_translation_covariance(A):
    h = np.array([0.3, -0.2])
    c = np.array([0.1, 0.2])
    u = bump_field(c, 1.5)
    v = bump_field(c + h, 1.5)
    x = np.array([0.2, 0.1])
    a = eval_operator(u, x, A, 0.8 * A.alpha_max)
    b = eval_operator(v, x + h, A, 0.8 * A.alpha_max)
    assert abs(a.value - b.value) / abs(a.value) < 1e-8


def test_linearity():
    A = ANISO
    u, v = bump_field([0, 0], 1.2), gaussian_field([0.2, 0.1], 0.7)
    w = Field(lambda x: 2.0 * u(x) - 0.5 * v(x), name="combo")
    x = [0.15, -0.25]
    a = 0.4
    lhs = eval_operator(w, x, A, a).value
    rhs = 2.0 * eval_operator(u, x, A, a).value - 0.5 * eval_operator(v, x, A, a).value
    assert lhs == pytest.approx(rhs, rel=1e-8)


def test_sign_at_interior_maximum():
    for A in (ISO, ANISO):
        assert eval_operator(bump_field([0, 0], 1.0), [0, 0], A, 0.8 * A.alpha_max).value > 0


def test_barrier_positive_small_gamma_isotropic():
    # with mu = 1 the barrier is |x|^{−γ}, positive for γ < n − 2α = 0.2
    A = make_anisotropy((2, 2), mu_override=1)
    for x in ([1.0, 0.0], [0.6, 0.8]):
        assert eval_operator(barrier(A, 0.05).field, x, A, 0.9).value > 0


def test_default_mu_barrier_negative_on_axis():
    # the angular part of (x⁴ + y⁴)^{−γ/4} dominates near γ* and flips the sign on the axes
    v = eval_operator(barrier(ISO, 0.1).field, [1.0, 0.0], ISO, 0.9).value
    assert v == pytest.approx(-0.0690, abs=1e-3)


def test_homogeneity_identity():
    u = quasi_power_field(ISO, 0.3)
    err, inconclusive = homogeneity_identity_check(u, [1.0, 0.0], 2.0, ISO, 0.9)
    assert err < 1e-5 and not inconclusive
    assert homogeneity_identity_check(u, [1.0, 0.0], 1.0, ISO, 0.9)[0] == 0
    B = barrier(ANISO, 0.3)
    err, _ = homogeneity_identity_check(B.field, [0.6, 0.7], 0.5, ANISO, 0.9 * ANISO.alpha_max)
    assert err < 1e-4


def test_convergence_under_tighter_tolerance():
    u = gaussian_field([0.1, 0.0], 0.8)
    x = [0.3, 0.2]
    a = eval_operator(u, x, ANISO, 0.3)
    b = eval_operator(u, x, ANISO, 0.3, QuadratureConfig(rel_tol=5e-9))
    assert abs(a.value - b.value) <= max(a.error_estimate, 1e-12)


def test_singular_point_rejected():
    with pytest.raises(DomainError):
        eval_operator(quasi_power_field(ISO, 0.3), [0.0, 0.0], ISO, 0.5)


def test_kernel_integrability():
    near, far = kernel_integrability_report(make_anisotropy((2, 2), mu_override=1), 0.5, 1.0)
    assert near == pytest.approx(2 * math.pi, rel=1e-2)
    assert far == pytest.approx(2 * math.pi, rel=1e-2)
    vals = [kernel_integrability_report(ANISO, 0.3, r) for r in (0.5, 0.25, 0.125)]
    assert all(b[0] < a[0] for a, b in zip(vals, vals[1:]))
    assert all(b[1] > a[1] for a, b in zip(vals, vals[1:]))
    assert kernel_integrability_report(ANISO, 0.3, 8.0)[1] < vals[0][1]


def test_anisotropic_homogeneous_scaling_exact():
    u = quasi_power_field(ANISO, 0.4, ANISO.mu)
    x = np.array([0.5, 0.9])
    a = eval_operator(u, x, ANISO, 0.45)
    b = eval_operator(u, scale_map(x, ANISO, 3.0), ANISO, 0.45)
    assert b.value == pytest.approx(3.0 ** (-0.4 - 0.9) * a.value, rel=1e-5)

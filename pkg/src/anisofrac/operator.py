"""Direct quadrature for the anisotropic fractional Laplacian.

    Δ^{β,α} u(x) = C_{β,α} ∫ (u(x) − u(y)) ‖x − y‖_β^{−c−2α} dy,   C_{β,α} = 2/b_max − α.

The integral is split with a smooth cutoff χ(t), where t is the T-orbit
radius of the offset y − x (y − x = T_t f with |f| = 1):

* near part  −½ ∫ χ (u(x+y) + u(x−y) − 2u(x)) K(y) dy, by dyadic shells in t
  (images of one reference annulus under T) plus the analytic contribution
  of the quadratic Taylor model below the last shell;
* far part   ∫ (1 − χ)(u(x) − u(x+y)) K(y) dy, in x-centred coordinates for
  compact or bounded fields, and in origin-centred orbit coordinates for
  homogeneous fields (so the singularity of u at 0 becomes a Jacobi weight).

In orbit coordinates K(T_t f) dy = t^{−1−2α} κ(f) dt dS(f) with
κ(f) = ‖f‖_β^{−c−2α} J(f), so every radial integral is one-dimensional.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .errors import DomainError, ParameterError
from .geometry import Anisotropy, cone_density, orbit_chart, orbit_radius, quasi_norm, scale_map
from .quadrature import angular_rule, gauss_jacobi_left, gauss_legendre, smooth_cutoff

__all__ = [
    "Field",
    "QuadratureConfig",
    "OperatorResult",
    "normalization_constant",
    "eval_operator",
    "homogeneity_identity_check",
    "kernel_integrability_report",
    "constant_field",
    "bump_field",
    "gaussian_field",
    "quasi_power_field",
    "angular_kernel",
    "ERROR_SENTINEL",
]

ERROR_SENTINEL = 1e300
DECAY_CLASSES = ("compact", "bounded", "homogeneous")
TAIL_MODES = ("analytic-homogeneous", "truncate")


@dataclass(frozen=True, eq=False)
class Field:
    """A real function on R^n with the metadata the quadrature needs.

    ``func`` maps an (m, n) array to an (m,) array.  ``homogeneity`` is the
    degree −γ with u(T_r x) = r^{−γ} u(x).  ``support_radius`` is a Euclidean
    radius about the origin containing the support of a compact field.
    ``hessian`` optionally returns the exact Hessian at one point.
    """

    func: Callable
    homogeneity: float | None = None
    decay_class: str = "bounded"
    support_radius: float | None = None
    hessian: Callable | None = None
    smooth: Callable | None = None
    name: str = "field"

    def __post_init__(self):
        if self.decay_class not in DECAY_CLASSES:
            raise ParameterError(f"decay_class must be one of {DECAY_CLASSES}")
        if self.decay_class == "homogeneous" and self.homogeneity is None:
            raise ParameterError("homogeneous fields must declare their homogeneity degree")
        if self.decay_class == "compact" and (self.support_radius is None or self.support_radius <= 0):
            raise ParameterError("compact fields need a positive support_radius")

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        flat = x.reshape(-1, x.shape[-1])
        out = np.asarray(self.func(flat), dtype=float).reshape(x.shape[:-1])
        return float(out) if out.ndim == 0 else out

    def smoothness_at(self, x) -> bool:
        return True if self.smooth is None else bool(self.smooth(np.asarray(x, dtype=float)))


@dataclass(frozen=True)
class QuadratureConfig:
    """Controls for :func:`eval_operator`.

    ``near_radius`` is the T-orbit radius of the symmetrised near zone,
    ``far_cutoff`` the truncation radius R_∞ for non-homogeneous fields.
    ``angular_panels`` and ``gauss_order`` size the base rules; the error
    estimate compares against a rule refined in both.
    """

    near_radius: float = 0.5
    far_cutoff: float = 2.0 ** 20
    rel_tol: float = 1e-8
    max_subdivisions: int = 40
    tail_mode: str = "analytic-homogeneous"
    angular_panels: int = 8
    gauss_order: int = 12

    def __post_init__(self):
        problems = self.violations()
        if problems:
            raise ParameterError("; ".join(problems))

    def violations(self) -> list[str]:
        p = []
        if not (self.near_radius > 0):
            p.append("near_radius must be > 0")
        if not (self.near_radius < self.far_cutoff):
            p.append("near_radius must be < far_cutoff")
        if not (0 < self.rel_tol <= 1e-2):
            p.append("rel_tol must lie in (0, 1e-2]")
        if int(self.max_subdivisions) != self.max_subdivisions or self.max_subdivisions < 1:
            p.append("max_subdivisions must be a positive integer")
        if self.tail_mode not in TAIL_MODES:
            p.append(f"tail_mode must be one of {TAIL_MODES}")
        if self.angular_panels < 1 or self.gauss_order < 2:
            p.append("angular_panels ≥ 1 and gauss_order ≥ 2 required")
        return p


@dataclass(frozen=True)
class OperatorResult:
    value: float
    error_estimate: float
    near_part: float
    far_part: float
    tail_part: float
    flagged: bool = False
    shells: int = 0

    def row(self, x) -> list[float]:
        return [*map(float, np.ravel(x)), self.value, self.error_estimate,
                self.near_part, self.far_part, self.tail_part]


def normalization_constant(A: Anisotropy, alpha: float) -> float:
    """C_{β,α} = 2/b_max − α, defined for 0 < α < 2/b_max."""
    if not (0.0 < alpha < A.alpha_max):
        raise ParameterError(f"alpha = {alpha} outside (0, 2/b_max = {A.alpha_max:g})")
    return A.alpha_max - alpha


# ---------------------------------------------------------------------------
# Stock fields


def constant_field(value: float, n: int) -> Field:
    return Field(lambda x: np.full(x.shape[0], float(value)), homogeneity=0.0,
                 decay_class="bounded", hessian=lambda x: np.zeros((n, n)), name="constant")


def bump_field(center, radius: float = 1.0, amplitude: float = 1.0) -> Field:
    """C^∞ bump amplitude·exp(1 − 1/(1 − |x−c|²/R²)), supported in the Euclidean ball B_R(c)."""
    center = np.asarray(center, dtype=float)

    def f(x):
        r2 = np.sum((x - center) ** 2, axis=-1) / radius ** 2
        inside = r2 < 1.0
        out = np.zeros(x.shape[0])
        out[inside] = amplitude * np.exp(1.0 - 1.0 / (1.0 - r2[inside]))
        return out

    return Field(f, decay_class="compact", support_radius=float(np.linalg.norm(center) + radius), name="bump")


def gaussian_field(center, width: float = 1.0, amplitude: float = 1.0) -> Field:
    center = np.asarray(center, dtype=float)
    return Field(lambda x: amplitude * np.exp(-np.sum((x - center) ** 2, axis=-1) / width ** 2),
                 decay_class="bounded", name="gaussian")


def quasi_power_field(A: Anisotropy, gamma: float, multiplier: float = 1.0) -> Field:
    """u(x) = ‖x‖_{mβ}^{−γ/m}, homogeneous of degree −γ under T_β."""
    m = float(multiplier)
    return Field(lambda x: np.asarray(quasi_norm(x, A, m)) ** (-gamma / m), homogeneity=-float(gamma),
                 decay_class="homogeneous", smooth=lambda x: bool(np.any(x != 0)), name="quasi_power")


# ---------------------------------------------------------------------------
# Internals


def angular_kernel(f, A: Anisotropy, alpha: float):
    """κ(f) = ‖f‖_β^{−c−2α} J(f) for unit vectors f."""
    return quasi_norm(f, A) ** (-A.c - 2 * alpha) * cone_density(f, A)


def _cutoff_integral(rho: float, alpha: float, order: int = 48) -> float:
    """∫_0^∞ (1 − χ(t)) t^{−1−2α} dt for the cutoff of radius ρ."""
    ed = np.linspace(0.5 * rho, rho, 9)
    t, w = gauss_legendre(ed[:-1], ed[1:], order)
    return float(np.sum(w * (1 - smooth_cutoff(t, rho)) * t ** (-1 - 2 * alpha)) + rho ** (-2 * alpha) / (2 * alpha))


def _hessian_diag(u: Field, x: np.ndarray, scale: float) -> np.ndarray:
    if u.hessian is not None:
        return np.diag(np.asarray(u.hessian(x), dtype=float)).copy()
    n = x.size
    d = 2e-4 * scale
    E = np.eye(n) * d
    pts = np.concatenate([x + E, x - E, x[None, :]])
    v = u(pts)
    return (v[:n] + v[n:2 * n] - 2 * v[-1]) / d ** 2


def _near_part(u, x, A, alpha, rho, cfg, panels, order, scale):
    """Returns (value, error, shells_used, flagged)."""
    p = A.exponents
    f, wf = angular_rule(A.n, panels, order, half=True)
    wang = 2.0 * wf * angular_kernel(f, A, alpha)
    ang = np.sum(wang[:, None] * f * f, axis=0)  # ∫ κ f_a² dS over the full sphere
    H = _hessian_diag(u, x, scale)
    q = 2 * p - 2 * alpha
    ux = float(u(x[None, :])[0])
    acc = 0.0
    last_dev = np.inf
    flagged = True
    k = 0
    t_lo = rho
    for k in range(int(cfg.max_subdivisions)):
        t_hi = rho * 2.0 ** (-k)
        t_lo = 0.5 * t_hi
        if k == 0:
            # the cutoff transition needs a composite rule
            ed = np.linspace(math.log(t_lo), math.log(t_hi), 5)
            ell, wl = (a.ravel() for a in gauss_legendre(ed[:-1], ed[1:], order))
        else:
            ell, wl = gauss_legendre(math.log(t_lo), math.log(t_hi), order)
        t = np.exp(ell)
        wt = wl * t ** (-2 * alpha)
        if k == 0:
            wt = wt * smooth_cutoff(t, rho)
        y = f[None, :, :] * t[:, None, None] ** p
        xs = x + y
        vals = u(np.concatenate([xs, 2 * x - xs], axis=0).reshape(-1, A.n)).reshape(2, t.size, -1)
        d2 = vals[0] + vals[1] - 2 * ux
        shell = -0.5 * float(np.sum(wt[:, None] * wang[None, :] * d2))
        model = -0.5 * float(np.sum(wt[:, None] * (t[:, None] ** (2 * p) * H * ang)))
        acc += shell
        last_dev = abs(shell - model)
        if k >= 2 and last_dev <= cfg.rel_tol * max(abs(acc), 1e-300) + 1e-14 * abs(ux) * np.sum(np.abs(wt)) * np.sum(wang):
            flagged = False
            break
    tail = -0.5 * float(np.sum(H * ang * t_lo ** q / q))
    ratio = 2.0 ** (-(np.min(q) + 2 * np.min(p)))
    err = last_dev * ratio / (1 - ratio)
    return acc + tail, err, k + 1, flagged


def _circle_rule_around(theta_x: float, width: float, panels: int, order: int, graded: bool):
    """Composite Gauss rule on the circle, broken at the axes and graded around θ_x.

    With ``graded`` the panels next to each axis are refined geometrically,
    for integrands with |e_k|^{b_k} behaviour there.
    """
    brk = [0.5 * np.pi * k for k in range(5)]
    brk += [(theta_x + width * d) % (2 * np.pi) for d in (-2, -1, -0.5, 0, 0.5, 1, 2)]
    brk = np.unique(np.round(np.sort(brk), 14))
    maxlen = 0.5 * np.pi / panels
    edges = [0.0]
    for a, b in zip(brk[:-1], brk[1:]):
        if b - a < 1e-12:
            continue
        k = max(1, int(math.ceil((b - a) / maxlen)))
        edges.extend(np.linspace(a, b, k + 1)[1:])
    edges = np.asarray(edges)
    if graded:
        fine = []
        for a in (0.5 * np.pi * k for k in range(5)):
            fine.extend(a + sgn * 0.25 * maxlen * 4.0 ** -np.arange(8) for sgn in (-1, 1))
        fine = np.concatenate(fine)
        edges = np.unique(np.concatenate([edges, fine[(fine > 0) & (fine < 2 * np.pi)]]))
    th, w = gauss_legendre(edges[:-1], edges[1:], order)
    th, w = th.ravel(), w.ravel()
    return np.stack([np.cos(th), np.sin(th)], axis=1), w


def _split_radii(x, A, rho_cfg):
    """Near radius ρ and origin-zone radius s_η for a homogeneous field at x.

    Both are measured in T-orbit radius.  With k the coordinate maximising
    |x_k|^{b_k/2}, ρ^{2/b_k} ≤ |x_k|/2 and s_η^{2/b_k} = 0.45|x_k|, so the
    near zone around x and the origin zone are disjoint.
    """
    p = A.exponents
    k = int(np.argmax(np.abs(x) ** (1.0 / p)))
    rho = min(rho_cfg, (0.5 * abs(x[k])) ** (1.0 / p[k]))
    s_eta = (0.45 * abs(x[k])) ** (1.0 / p[k])
    return rho, s_eta


def _far_part(u, x, A, alpha, rho, cfg, panels, order, s_eta=None):
    """(far, tail, error_bound) of ∫(1 − χ)(u(x) − u(x+y))K(y) dy.

    The bulk is integrated in x-centred orbit coordinates out to R_∞.  For a
    homogeneous field an origin zone {s(w) < s_η} is cut out with a smooth
    cutoff η and integrated in origin-centred coordinates, where the
    singularity of u at 0 becomes the Jacobi weight s^{c−1−γ}.
    """
    p = A.exponents
    homogeneous = s_eta is not None
    extra_t = []
    if homogeneous and A.n == 2:
        # resolve the origin zone, seen from x in direction −x
        t0, f0 = orbit_chart(-x, A)
        width = min(float(np.max(s_eta ** p)) / float(np.linalg.norm(x)), np.pi / 8)
        graded = any(A.b[k] % 2 != 0 for k in range(2))
        f, wf = _circle_rule_around(math.atan2(f0[1], f0[0]), width, panels, order, graded)
        extra_t = list(t0 * 2.0 ** np.array([-1.0, -0.5, -0.25, 0.0, 0.25, 0.5, 1.0]))
    else:
        f, wf = angular_rule(A.n, panels, order)
    kap = angular_kernel(f, A, alpha)
    wang = wf * kap
    MK = float(np.sum(wang))
    ux = float(u(x[None, :])[0])
    R = float(cfg.far_cutoff)
    edges = list(np.linspace(0.5 * rho, rho, 5))
    while edges[-1] < R:
        edges.append(min(2 * edges[-1], R))
    edges = np.log(np.array(edges))
    mids = 0.5 * (edges[:-1] + edges[1:])
    extra = np.log([v for v in extra_t if rho < v < R])
    edges = np.unique(np.concatenate([edges, mids[4:], extra]))
    ell, wl = gauss_legendre(edges[:-1], edges[1:], order)
    t, wl = np.exp(ell.ravel()), wl.ravel()
    wt = wl * t ** (-2 * alpha) * (1 - smooth_cutoff(t, rho))
    w = x + f[None, :, :] * t[:, None, None] ** p
    if homogeneous:
        # s(w) < s_η forces |w_k| < s_η^{p_k} in every coordinate
        keep = np.ones(w.shape[:-1])
        cand = np.all(np.abs(w) < s_eta ** p, axis=-1)
        keep[cand] = 1.0 - smooth_cutoff(orbit_radius(w[cand], p), s_eta)
        uw = np.zeros(keep.shape)
        live = keep > 0
        uw[live] = u(w[live])
        diff = keep * (ux - uw)
    else:
        uw = u(w.reshape(-1, A.n)).reshape(t.size, -1)
        diff = ux - uw
    far = float(np.sum(wt[:, None] * wang[None, :] * diff))
    bound = 0.0
    if homogeneous:
        gam = -float(u.homogeneity)
        Uk = float(np.sum(wang * u(f)))
        tail = ux * MK * R ** (-2 * alpha) / (2 * alpha) - Uk * R ** (-gam - 2 * alpha) / (gam + 2 * alpha)
        # relative accuracy of the far-field expansion is O(R^{-min p})
        bound = abs(Uk) * R ** (-gam - 2 * alpha - float(np.min(p))) / (gam + 2 * alpha)
        z, zerr = _origin_zone(u, x, A, alpha, s_eta, panels, order, ux)
        far += z
        bound += zerr
    else:
        reach = float(np.linalg.norm(x)) + (u.support_radius or np.inf)
        exact = (u.decay_class == "compact" and cfg.tail_mode == "analytic-homogeneous"
                 and R >= 1.0 and float(np.min(R ** p)) >= reach)
        if exact:
            tail = ux * MK * R ** (-2 * alpha) / (2 * alpha)
        else:
            last = slice(t.size - order, t.size)
            wl_last = (wt[last, None] * wang[None, :])
            ubar = float(np.sum(wl_last * uw[last]) / np.sum(wl_last))
            tail = (ux - ubar) * MK * R ** (-2 * alpha) / (2 * alpha)
            bound = float(np.max(np.abs(uw[last] - ubar))) * MK * R ** (-2 * alpha) / (2 * alpha)
    return far, tail, bound


def _origin_zone(u, x, A, alpha, s_eta, panels, order, ux):
    """∫ η(s(w)) (u(x) − u(w)) K(w − x) dw with w = T_s e; returns (value, error bound)."""
    gam = -float(u.homogeneity)
    if not (gam < A.c):
        raise ParameterError(f"homogeneous field with γ = {gam} ≥ c is not locally integrable")
    p = A.exponents
    pmin = float(np.min(p))
    e, we = angular_rule(A.n, panels, order)
    wJ = we * cone_density(e, A)
    ue = u(e)
    kexp = -A.c - 2 * alpha
    m = 2 * order

    def kern(s):
        pts = scale_map(e[:, None, :], A, np.broadcast_to(s, (e.shape[0], s.size)))
        return quasi_norm(pts - x, A) ** kexp

    total = 0.0
    half = 0.5 * s_eta
    # (0, s_η/2): η = 1; σ = s^{pmin} turns s^{c−1−g} ds into σ^{(c−g)/pmin − 1} dσ / pmin
    for g, coef in ((0.0, ux), (gam, None)):
        sig, ws = gauss_jacobi_left(half ** pmin, (A.c - g) / pmin - 1.0, m)
        s = sig ** (1.0 / pmin)
        block = np.sum(wJ[:, None] * (ws / pmin)[None, :] * kern(s), axis=1)
        total += ux * block.sum() if coef is not None else -float(np.sum(ue * block))
    ed = np.linspace(half, s_eta, 5)
    s, ws = (a.ravel() for a in gauss_legendre(ed[:-1], ed[1:], order))
    eta = smooth_cutoff(s, s_eta)
    k = kern(s)
    total += float(np.sum(wJ[:, None] * (ws * eta * s ** (A.c - 1))[None, :] * k * (ux - ue[:, None] * s[None, :] ** (-gam))))
    return total, 0.0


def _eval_once(u, x, A, alpha, cfg, panels, order):
    if u.decay_class == "homogeneous":
        if not np.any(x != 0):
            raise DomainError("homogeneous fields cannot be evaluated at the origin")
        rho, s_eta = _split_radii(x, A, cfg.near_radius)
        near, nerr, shells, flag = _near_part(u, x, A, alpha, rho, cfg, panels, order, float(np.linalg.norm(x)))
        far, tail, bound = _far_part(u, x, A, alpha, rho, cfg, panels, order, s_eta)
    else:
        rho = cfg.near_radius
        near, nerr, shells, flag = _near_part(u, x, A, alpha, rho, cfg, panels, order, 1.0)
        far, tail, bound = _far_part(u, x, A, alpha, rho, cfg, panels, order)
    return near, far, tail, nerr + bound, shells, flag


def eval_operator(u: Field, x, A: Anisotropy, alpha: float, cfg: QuadratureConfig | None = None) -> OperatorResult:
    """Evaluate Δ^{β,α}u(x) by direct quadrature.

    The error estimate is the difference to a rule with twice the angular
    panels and four more Gauss points per panel, plus the shell-truncation
    and far-field truncation bounds.  Reaching ``max_subdivisions`` sets
    ``flagged`` and returns ``ERROR_SENTINEL`` as the error estimate.
    """
    cfg = cfg or QuadratureConfig()
    C = normalization_constant(A, alpha)
    x = np.asarray(x, dtype=float).ravel()
    if x.size != A.n:
        raise ParameterError(f"point has dimension {x.size}, expected {A.n}")
    if not u.smoothness_at(x):
        raise DomainError("field is not C^{1,1} at the evaluation point")
    p0, o0 = cfg.angular_panels, cfg.gauss_order
    n1, f1, t1, e1, _, _ = _eval_once(u, x, A, alpha, cfg, p0, o0)
    n2, f2, t2, e2, shells, flag = _eval_once(u, x, A, alpha, cfg, 2 * p0, o0 + 4)
    near, far, tail = C * n2, C * f2, C * t2
    value = near + far + tail
    err = abs((n2 + f2 + t2) - (n1 + f1 + t1)) * C + C * max(e1, e2)
    if flag:
        err = ERROR_SENTINEL
    return OperatorResult(value=float(value), error_estimate=float(err), near_part=float(near),
                          far_part=float(far), tail_part=float(tail), flagged=bool(flag), shells=shells)


def homogeneity_identity_check(u: Field, x, r: float, A: Anisotropy, alpha: float,
                               cfg: QuadratureConfig | None = None, noise_floor: float = 1e-12):
    """Relative error of Δu(T_r x) against r^{−(γ+2α)} Δu(x).

    Returns ``(error, inconclusive)``; ``inconclusive`` is True when Δu(x) is
    below ``noise_floor`` relative to u(x) or below its own error estimate.
    """
    if u.homogeneity is None:
        raise ParameterError("field must declare a homogeneity degree")
    if r <= 0:
        raise ParameterError("r must be > 0")
    gam = -float(u.homogeneity)
    x = np.asarray(x, dtype=float).ravel()
    base = eval_operator(u, x, A, alpha, cfg)
    if r == 1.0:
        return 0.0, False
    scaled = eval_operator(u, scale_map(x, A, r), A, alpha, cfg)
    expected = r ** (-(gam + 2 * alpha)) * base.value
    inconclusive = abs(base.value) <= max(noise_floor * abs(u(x[None, :])[0]), base.error_estimate)
    if expected == 0:
        return math.inf, True
    return abs(scaled.value - expected) / abs(expected), bool(inconclusive)


def kernel_integrability_report(A: Anisotropy, alpha: float, r: float, panels: int = 16, order: int = 16):
    """(near, far) = (∫_{ρ<r} |y|² K dy, ∫_{ρ>r} K dy), ρ(y) = ‖y‖_{μβ}^{1/μ}.

    Both are reduced to angular integrals in orbit coordinates:
    ρ(T_s e) = s ρ(e), so the radial parts are elementary powers.
    """
    normalization_constant(A, alpha)
    if r <= 0:
        raise ParameterError("r must be > 0")
    e, we = angular_rule(A.n, panels, order)
    kap = we * angular_kernel(e, A, alpha)
    rho_e = quasi_norm(e, A, A.mu) ** (1.0 / A.mu)
    S = r / rho_e
    q = 2 * A.exponents - 2 * alpha
    near = float(np.sum(kap[:, None] * e * e * S[:, None] ** q / q))
    far = float(np.sum(kap * S ** (-2 * alpha) / (2 * alpha)))
    return near, far

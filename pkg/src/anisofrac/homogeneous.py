"""Homogeneous fields, the profile operator L_γ and the scaling exponent γ*.

A −γ-homogeneous field is fixed by its profile on the μβ-sphere,
u(T_ρ ω) = ρ^{−γ} φ(ω).  In the orbit chart y = T_s e (|e| = 1, angle θ)
the same field reads u(y) = s^{−γ} ψ(θ) with ψ(θ_j) = ρ(e_j)^{−γ} φ_j, and
ψ is represented by its trigonometric interpolant through the grid angles.
Since Δ^{β,α}u(ω_i) = ρ_i^{γ+2α} Δ^{β,α}u(e_i), every row of L_γ is
assembled at a base point e_i:

* near part, x-centred: symmetrised second differences over dyadic shells
  in the orbit radius t of y − e_i, plus the Hessian tail below the last
  shell;
* far part, origin-centred: ∫∫ (1 − χ)(ψ_i − s^{−γ}ψ(θ)) K s^{c−1} J ds dθ
  with the trapezoid rule in θ on a doubled angle grid, Gauss–Legendre in
  log s, and Gauss–Jacobi end blocks in σ = s^{p_min} (s → 0) and
  τ = s^{−p_min} (s → ∞) that are exact in γ.

Everything that does not depend on γ is computed once; the γ-dependence of
the near part and of the middle s-block enters through a truncated series
in (γ − γ₀), so re-assembling at a new γ costs a few matrix products.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import brentq, minimize_scalar

from .errors import BracketError, DomainError, ParameterError, SolverError
from .geometry import (Anisotropy, SphereGrid, orbit_chart, orbit_radius, project_to_sphere,
                       quasi_norm, scale_map)
from .operator import QuadratureConfig, _cutoff_integral, angular_kernel, normalization_constant
from .quadrature import angular_rule, gauss_jacobi_left, gauss_legendre, smooth_cutoff


def _aligned(a) -> np.ndarray:
    """C-contiguous copy of ``a`` starting on a 64-byte boundary."""
    a = np.asarray(a, dtype=float)
    buf = np.empty(a.size * 8 + 64, dtype=np.uint8)
    off = (-buf.ctypes.data) % 64
    out = buf[off:off + a.size * 8].view(float).reshape(a.shape)
    out[...] = a
    return out


def _dot(a, b) -> np.ndarray:
    """Matrix product whose rounding does not depend on where numpy placed the operands.

    BLAS kernels pick SIMD paths by pointer alignment, which otherwise makes
    results differ in the last bit between runs.
    """
    a, b = _aligned(a), _aligned(b)
    out = _aligned(np.zeros(a.shape[:-1] + b.shape[1:]))   # b is 1-D or 2-D here
    np.matmul(a, b, out=out)
    return out

__all__ = [
    "HomogeneousProfile",
    "ProfileOperator",
    "GammaStarResult",
    "assemble_profile_operator",
    "solve_homogeneous_poisson",
    "principal_eigenpair",
    "gamma_star",
    "fundamental_solution",
    "harnack_ratio",
    "two_sided_bounds",
    "beta_sphere_extrema",
    "holder_seminorm_of_psi",
]

# rule sizes of the profile discretisation
NEAR_SHELLS = 16
NEAR_ORDER = 8
NEAR_PANELS = 4
S_ORDER = 8
END_POINTS = 16
BLOWUP_FACTOR = 1e3
COND_LIMIT = 1e12


@dataclass(frozen=True, eq=False)
class HomogeneousProfile:
    """Node values φ_j on the μβ-sphere of a −γ-homogeneous field."""

    grid: SphereGrid
    values: np.ndarray
    gamma: float
    positive: bool = False
    info: dict = field(default_factory=dict)

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        if v.shape != (self.grid.size,):
            raise ParameterError("profile needs one value per grid node")
        if self.positive and not np.all(v > 0):
            raise DomainError("profile tagged positive has nonpositive values")

    def __call__(self, x):
        """Induced field ρ(x)^{−γ} φ̂(ω) with (ρ, ω) = project_to_sphere(x), φ̂ interpolated."""
        A = self.grid.anisotropy
        x = np.asarray(x, dtype=float)
        flat = x.reshape(-1, A.n)
        rho, omega = project_to_sphere(flat, A)
        out = np.asarray(rho) ** (-self.gamma) * self.grid.interpolate(self.values, omega)
        out = out.reshape(x.shape[:-1])
        return float(out) if out.ndim == 0 else out

    def rows(self) -> list[list]:
        return [[j, *map(float, self.grid.points[j]), float(v)] for j, v in enumerate(self.values)]


@dataclass(frozen=True, eq=False)
class ProfileOperator:
    """(L_γφ)_i = D_i φ_i + Σ_j W_ij φ_j ≈ Δ^{β,α}u(ω_i)."""

    gamma: float
    alpha: float
    anisotropy: Anisotropy
    grid: SphereGrid
    W: np.ndarray
    D: np.ndarray
    assembly_diagnostics: dict
    _geometry: object = field(default=None, repr=False)

    @property
    def matrix(self) -> np.ndarray:
        return self.W + np.diag(self.D)

    def apply(self, phi) -> np.ndarray:
        phi = np.asarray(phi, dtype=float)
        return self.D * phi + self.W @ phi


# ---------------------------------------------------------------------------
# Trigonometric interpolation on θ_j = 2πj/N (N even)


def _dirichlet(delta, N: int):
    """Cardinal function of trigonometric interpolation at offset δ from its node."""
    delta = np.asarray(delta, dtype=float)
    d = np.mod(delta + np.pi, 2 * np.pi) - np.pi
    small = np.abs(d) < 1e-13
    with np.errstate(divide="ignore", invalid="ignore"):
        out = np.sin(0.5 * N * d) / (N * np.tan(0.5 * d))
    return np.where(small, 1.0, out)


def _cardinal_rows(theta, N: int):
    """(m, N) matrix of ℓ_j(θ) for the angles θ (m,)."""
    th = np.asarray(theta, dtype=float)
    jj = 2 * np.pi * np.arange(N) / N
    return _dirichlet(th[:, None] - jj[None, :], N)


def _diff_matrices(N: int):
    h = 2 * np.pi / N
    k = np.arange(N)
    diff = (k[:, None] - k[None, :]) % N
    sign = np.where(diff % 2 == 0, 1.0, -1.0)
    off = diff != 0
    arg = np.where(off, diff * h / 2, 1.0)
    D1 = np.where(off, 0.5 * sign / np.tan(arg), 0.0)
    D2 = np.where(off, -0.5 * sign / np.sin(arg) ** 2, -np.pi ** 2 / (3 * h ** 2) - 1.0 / 6.0)
    return D1, D2


def _angle(y, A):
    _, e = orbit_chart(y, A)
    return np.arctan2(e[..., 1], e[..., 0])


def _series_length(bound: float) -> int:
    """Terms needed for Σ_k B^k/k! to reach double precision."""
    k, term = 0, 1.0
    while term > 1e-17 * math.exp(-bound) or k < 4:
        k += 1
        term *= bound / k
    return k + 1


def _series_basis(ell, gamma0: float, K: int):
    """exp(−γ₀ℓ)(−ℓ)^k/k! for k < K, shape (K,) + ℓ.shape."""
    ell = np.asarray(ell, dtype=float)
    out = np.empty((K,) + ell.shape)
    out[0] = np.exp(-gamma0 * ell)
    for k in range(1, K):
        out[k] = out[k - 1] * (-ell) / k
    return out


def _cheb_nodes(length: float, m: int):
    k = np.arange(m)
    return 0.5 * length * (1 - np.cos((2 * k + 1) * np.pi / (2 * m)))


# ---------------------------------------------------------------------------
# γ-independent precomputation


@dataclass(eq=False)
class _Geometry:
    A: Anisotropy
    alpha: float
    grid: SphereGrid
    gamma0: float
    near_mom: np.ndarray        # (N, Kn, N)
    hess_geo: np.ndarray        # (N, 2, 4): L_a, L_aa, Θ_a, Θ_aa
    tail_coef: np.ndarray       # (N, 2): Ang_a t_min^{q_a}/q_a
    diag_far: np.ndarray        # (N,)
    mid_mom: np.ndarray         # (N, 2N, Km)
    small: np.ndarray           # (N, 2N, END_POINTS)
    large: np.ndarray           # (N, 2N, END_POINTS)
    sigma_nodes: np.ndarray
    tau_nodes: np.ndarray
    sigma_len: float
    tau_len: float
    fine_card: np.ndarray       # (2N, N)
    D1: np.ndarray
    D2: np.ndarray
    diagnostics: dict


def _near_radius(e, A, cap):
    p = A.exponents
    k = int(np.argmax(np.abs(e) ** (1.0 / p)))
    return min(cap, (0.5 * abs(e[k])) ** (1.0 / p[k]))


def _near_node(i, G):
    """Near-part moment rows, geometry derivatives and tail coefficients for node i."""
    A, alpha, grid = G["A"], G["alpha"], G["grid"]
    N = grid.size
    p = A.exponents
    e = grid.base[i]
    th_i = 2 * np.pi * i / N
    rho = G["rho"][i]
    f, wang = G["f"], G["wang"]
    ts, wts = [], []
    for k in range(NEAR_SHELLS):
        t_hi = rho * 2.0 ** (-k)
        t_lo = 0.5 * t_hi
        if k == 0:
            ed = np.linspace(math.log(t_lo), math.log(t_hi), 5)
            ell, wl = (a.ravel() for a in gauss_legendre(ed[:-1], ed[1:], NEAR_ORDER))
        else:
            ell, wl = gauss_legendre(math.log(t_lo), math.log(t_hi), NEAR_ORDER)
        t = np.exp(ell)
        w = wl * t ** (-2 * alpha)
        if k == 0:
            w = w * smooth_cutoff(t, rho)
        ts.append(t)
        wts.append(w)
    t = np.concatenate(ts)
    wt = np.concatenate(wts)
    t_min = rho * 2.0 ** (-NEAR_SHELLS)
    z = f[None, :, :] * t[:, None, None] ** p            # (T, F, 2)
    w = -0.5 * wt[:, None] * wang[None, :]               # (T, F)
    ys = np.concatenate([e + z, e - z], axis=0).reshape(-1, 2)
    ws = np.concatenate([w, w], axis=0).ravel()
    s, eb = orbit_chart(ys, A)
    ell = np.log(s)
    th = np.arctan2(eb[:, 1], eb[:, 0])
    rows = _dirichlet(th[:, None] - th_i - 2 * np.pi * (np.arange(N)[None, :] - i) / N, N)
    K = G["Kn"]
    basis = _series_basis(ell, G["gamma0"], K) * ws[None, :]
    mom = _dot(basis, rows)
    mom[0, i] -= 2.0 * float(np.sum(w))
    # first and second derivatives of log s and Θ at e_i
    d = 1e-4
    geo = np.empty((2, 4))
    for a in range(2):
        da = np.zeros(2)
        da[a] = d
        pts = np.stack([e + da, e - da])
        sp, ep = orbit_chart(pts, A)
        lp = np.log(sp)
        tp = np.angle(np.exp(1j * (np.arctan2(ep[:, 1], ep[:, 0]) - th_i)))
        geo[a] = [(lp[0] - lp[1]) / (2 * d), (lp[0] + lp[1]) / d ** 2,
                  (tp[0] - tp[1]) / (2 * d), (tp[0] + tp[1]) / d ** 2]
    q = 2 * p - 2 * alpha
    tail = -0.5 * G["ang"] * t_min ** q / q
    return mom, geo, tail, float(np.max(np.abs(ell)))


def _far_node(i, G):
    """γ-independent far-part data for node i on the doubled angle grid."""
    A, alpha, grid = G["A"], G["alpha"], G["grid"]
    N = grid.size
    p = A.exponents
    pmin = float(np.min(p))
    e_i = grid.base[i]
    rho = G["rho"][i]
    M = 2 * N
    th = 2 * np.pi * i / N + np.pi * np.arange(M) / N
    eq = np.stack([np.cos(th), np.sin(th)], axis=1)
    thw = (np.pi / N) * np.sum(p * eq * eq, axis=1)          # dθ·J(e_θ)
    kexp = -(A.c + 2 * alpha) / 2.0

    def kern(z):
        return np.sum(np.abs(z) ** A.b, axis=-1) ** kexp

    # middle block on log-s panels
    ls, wls = G["ls"], G["wls"]
    s = np.exp(ls)
    y = eq[:, None, :] * s[None, :, None] ** p
    z = y - e_i
    cut = np.ones(z.shape[:-1])
    cand = np.all(np.abs(z) < rho ** p, axis=-1)
    if np.any(cand):
        cut[cand] = 1.0 - smooth_cutoff(orbit_radius(z[cand], p), rho)
    live = cut > 0
    val = np.zeros(z.shape[:-1])
    val[live] = cut[live] * kern(z[live])
    Wmid = val * (wls * s ** A.c)[None, :] * thw[:, None]
    mid = _dot(Wmid, G["mid_basis"].T)                               # (M, Km)
    # s → 0: samples at Chebyshev σ nodes, s = σ^{1/pmin}
    sc = G["sigma_nodes"] ** (1.0 / pmin)
    small = kern(eq[:, None, :] * sc[None, :, None] ** p - e_i) * thw[:, None]
    # s → ∞: K(T_s e − e_i) = s^{−c−2α} K(e − T_{1/s} e_i), 1/s = τ^{1/pmin}
    inv = G["tau_nodes"] ** (1.0 / pmin)
    large = kern(eq[:, None, :] - inv[None, :, None] ** p * e_i) * thw[:, None]
    hole = int(np.sum(cand))
    return mid, small, large, hole


def _s_panels(lo: float, hi: float, s_a: float, s_b: float, width: float):
    """Log-s panel edges on [s_a, s_b], uniform of ``width`` on [lo, hi] and doubling outside."""
    la, lb, l0, l1 = map(math.log, (s_a, s_b, lo, hi))
    k = max(1, int(math.ceil((l1 - l0) / width)))
    edges = list(np.linspace(l0, l1, k + 1))
    h = width
    x = l0
    while x > la:
        h *= 1.5
        x = max(la, x - h)
        edges.insert(0, x)
    h = width
    x = l1
    while x < lb:
        h *= 1.5
        x = min(lb, x + h)
        edges.append(x)
    return np.asarray(edges)


def _build_geometry(A: Anisotropy, alpha: float, grid: SphereGrid, cfg: QuadratureConfig, threads: int = 1) -> _Geometry:
    if A.n != 2:
        raise ParameterError("the profile operator is implemented for n = 2")
    N = grid.size
    if N % 2 or N < 16:
        raise ParameterError("the profile operator needs an even grid resolution ≥ 16")
    normalization_constant(A, alpha)
    p = A.exponents
    pmin = float(np.min(p))
    gamma0 = 0.5 * A.c
    rho = np.array([_near_radius(e, A, cfg.near_radius) for e in grid.base])
    f, wf = angular_rule(2, NEAR_PANELS, NEAR_ORDER, half=True)
    wang = 2.0 * wf * angular_kernel(f, A, alpha)
    ang = np.sum(wang[:, None] * f * f, axis=0)
    fa, wfa = angular_rule(2, 16, 16)
    MK = float(np.sum(wfa * angular_kernel(fa, A, alpha)))
    # s-range touched by the near zones
    ring = np.linspace(0, 2 * np.pi, 256, endpoint=False)
    fr = np.stack([np.cos(ring), np.sin(ring)], axis=1)
    s_lo, s_hi = np.inf, 0.0
    for i in range(N):
        zb = grid.base[i] + fr * rho[i] ** p
        sb = orbit_radius(zb, p)
        s_lo, s_hi = min(s_lo, float(sb.min())), max(s_hi, float(sb.max()))
    s_a, s_b = 0.5 * s_lo, 2.0 * s_hi
    width = min(0.05, 0.125 * float(np.min(rho)) ** float(np.max(p)))
    edges = _s_panels(s_lo, s_hi, s_a, s_b, width)
    ls, wls = (a.ravel() for a in gauss_legendre(edges[:-1], edges[1:], S_ORDER))
    Km = _series_length(gamma0 * float(np.max(np.abs(ls))))
    G = dict(A=A, alpha=alpha, grid=grid, rho=rho, f=f, wf=wf, wang=wang, ang=ang, gamma0=gamma0,
             ls=ls, wls=wls, mid_basis=_series_basis(ls, gamma0, Km),
             sigma_nodes=_cheb_nodes(s_a ** pmin, END_POINTS), tau_nodes=_cheb_nodes(s_b ** -pmin, END_POINTS))
    # log s inside the near zones is bounded by the zone's s-range
    G["Kn"] = _series_length(gamma0 * max(abs(math.log(s_lo)), abs(math.log(s_hi))))

    def run(fn):
        if threads > 1:
            with ThreadPoolExecutor(max_workers=threads) as pool:
                return list(pool.map(lambda i: fn(i, G), range(N)))
        return [fn(i, G) for i in range(N)]

    near = run(_near_node)
    far = run(_far_node)
    M = 2 * N
    fine = np.pi * np.arange(M) / N
    fine_card = _cardinal_rows(fine, N)
    fine_card[0::2] = np.eye(N)
    D1, D2 = _diff_matrices(N)
    diag = {
        "near_radius_min": float(rho.min()), "near_radius_max": float(rho.max()),
        "near_shells": NEAR_SHELLS, "s_a": s_a, "s_b": s_b, "s_panels": int(edges.size - 1),
        "theta_points": M, "near_series_terms": G["Kn"], "far_series_terms": Km,
        "hole_samples": int(sum(h for *_, h in far)),
        "max_abs_log_s_near": float(max(r[3] for r in near)),
    }
    return _Geometry(
        A=A, alpha=alpha, grid=grid, gamma0=gamma0,
        near_mom=np.stack([r[0] for r in near]), hess_geo=np.stack([r[1] for r in near]),
        tail_coef=np.stack([r[2] for r in near]),
        diag_far=MK * np.array([_cutoff_integral(r, alpha) for r in rho]),
        mid_mom=np.stack([r[0] for r in far]), small=np.stack([r[1] for r in far]),
        large=np.stack([r[2] for r in far]), sigma_nodes=G["sigma_nodes"], tau_nodes=G["tau_nodes"],
        sigma_len=s_a ** pmin, tau_len=s_b ** -pmin,
        fine_card=fine_card, D1=D1, D2=D2, diagnostics=diag)


def _end_weights(nodes, length, a, pmin):
    """Weights on Chebyshev samples for ∫_0^L σ^a g(σ) dσ / p_min."""
    xj, wj = gauss_jacobi_left(length, a, END_POINTS)
    return _dot(wj, _cardinals(nodes, xj)) / pmin


def _cardinals(nodes, x) -> np.ndarray:
    """Lagrange cardinal functions of ``nodes`` at ``x`` (barycentric form), shape (len(x), len(nodes))."""
    nodes = np.asarray(nodes, dtype=float)
    x = np.asarray(x, dtype=float)
    diff = nodes[:, None] - nodes[None, :]
    np.fill_diagonal(diff, 1.0)
    scale = np.ptp(nodes) / 4.0
    bw = 1.0 / np.prod(diff / scale, axis=1)
    d = x[:, None] - nodes[None, :]
    hit = d == 0.0
    d[hit] = 1.0
    t = bw[None, :] / d
    out = t / np.sum(t, axis=1, keepdims=True)
    rows = np.any(hit, axis=1)
    out[rows] = hit[rows].astype(float)
    return out


def _assemble(G: _Geometry, gamma: float) -> ProfileOperator:
    A, alpha, grid = G.A, G.alpha, G.grid
    if not (0 < gamma < A.c):
        raise ParameterError(f"gamma = {gamma} outside (0, c = {A.c:g})")
    N = grid.size
    p = A.exponents
    pmin = float(np.min(p))
    C = normalization_constant(A, alpha)
    dg = gamma - G.gamma0
    # near rows: series in (γ − γ₀) plus the Hessian tail
    cn = dg ** np.arange(G.near_mom.shape[1])
    near = sum(cn[k] * G.near_mom[:, k, :] for k in range(cn.size))
    La, Laa, Ta, Taa = (G.hess_geo[:, :, m] for m in range(4))
    c0 = np.sum(G.tail_coef * (gamma ** 2 * La ** 2 - gamma * Laa), axis=1)
    c1 = np.sum(G.tail_coef * (-2 * gamma * La * Ta + Taa), axis=1)
    c2 = np.sum(G.tail_coef * Ta ** 2, axis=1)
    near += np.diag(c0) + c1[:, None] * G.D1 + c2[:, None] * G.D2
    # far rows
    cm = dg ** np.arange(G.mid_mom.shape[2])
    F = _dot(G.mid_mom, cm)
    F += _dot(G.small, _end_weights(G.sigma_nodes, G.sigma_len, (A.c - gamma) / pmin - 1.0, pmin))
    F += _dot(G.large, _end_weights(G.tau_nodes, G.tau_len, (gamma + 2 * alpha) / pmin - 1.0, pmin))
    M = 2 * N
    idx = (2 * np.arange(N)[:, None] + np.arange(M)[None, :]) % M
    Froll = np.zeros((N, M))
    np.put_along_axis(Froll, idx, F, axis=1)
    B = _dot(Froll, G.fine_card)
    rho_i = grid.node_radius
    left = C * rho_i ** (gamma + 2 * alpha)
    right = rho_i ** (-gamma)
    W = left[:, None] * (near - B) * right[None, :]
    D = C * rho_i ** (2 * alpha) * G.diag_far
    return ProfileOperator(float(gamma), float(alpha), A, grid, W, D, dict(G.diagnostics), G)


def assemble_profile_operator(A: Anisotropy, alpha: float, gamma: float, grid: SphereGrid,
                              cfg: QuadratureConfig | None = None, threads: int = 1) -> ProfileOperator:
    """Discretise Δ^{β,α} on −γ-homogeneous fields as a matrix acting on node values.

    Rows are computed independently (optionally on ``threads`` workers) and
    stored by index, so the matrix does not depend on the thread count.
    """
    if grid.anisotropy != A:
        raise ParameterError("grid was built for a different anisotropy")
    if not (0 < gamma < A.c):
        raise ParameterError(f"gamma = {gamma} outside (0, c = {A.c:g})")
    G = _build_geometry(A, alpha, grid, cfg or QuadratureConfig(), threads)
    return _assemble(G, gamma)


def _reassemble(P: ProfileOperator, gamma: float) -> ProfileOperator:
    return _assemble(P._geometry, gamma)


# ---------------------------------------------------------------------------
# Solves


def solve_homogeneous_poisson(P: ProfileOperator) -> HomogeneousProfile:
    """Solve L_γφ = 1 by LU; ``info`` carries min φ, the residual and a condition estimate."""
    L = P.matrix
    N = L.shape[0]
    try:
        phi = np.linalg.solve(L, np.ones(N))
    except np.linalg.LinAlgError as exc:
        raise SolverError(f"singular profile operator at gamma = {P.gamma}") from exc
    cond = float(np.linalg.cond(L, 1))
    res = float(np.max(np.abs(L @ phi - 1.0)))
    info = {"min_value": float(phi.min()), "max_abs": float(np.max(np.abs(phi))), "residual": res,
            "condition": cond, "near_critical": bool(cond > COND_LIMIT or not np.isfinite(cond))}
    return HomogeneousProfile(P.grid, phi, P.gamma, positive=bool(np.all(phi > 0)), info=info)


def principal_eigenpair(P: ProfileOperator, seed=0, iterations: int = 50):
    """Eigenvalue of smallest real part and its eigenvector, by shifted inverse iteration.

    The shift comes from a dense eigenvalue estimate; the eigenvector is
    returned with positive sum and unit maximum norm.  Returns
    (λ, v, residual) with residual = ‖Lv − λv‖_∞/‖v‖_∞.
    """
    L = P.matrix
    N = L.shape[0]
    ev = np.linalg.eigvals(L)
    k = int(np.argmin(ev.real))
    lam0 = float(ev[k].real)
    if abs(ev[k].imag) > 1e-8 * max(1.0, abs(lam0)):
        raise SolverError("principal eigenvalue is not real")
    scale = max(1.0, float(np.max(np.abs(ev))))
    shift = lam0 - 1e-9 * scale
    v = np.random.default_rng(seed).random(N) + 0.5
    lu = np.linalg.inv(L - shift * np.eye(N))
    lam = lam0
    for _ in range(iterations):
        w = lu @ v
        w /= np.max(np.abs(w))
        lam_new = float(w @ (L @ w) / (w @ w))
        done = np.max(np.abs(w - v)) < 1e-13 and abs(lam_new - lam) <= 1e-13 * scale
        v, lam = w, lam_new
        if done:
            break
    if v.sum() < 0:
        v = -v
    v /= np.max(np.abs(v))
    res = float(np.max(np.abs(L @ v - lam * v)))
    return lam, v, res


@dataclass(frozen=True)
class GammaStarResult:
    gamma_star: float
    bracket_lo: float
    bracket_hi: float
    eigenvalue_at_star: float
    eigen_gamma: float | None
    eigen_consistent: bool
    blowup_bound_hit: bool
    steps: int
    history: list

    def diagnostics(self) -> dict:
        return {
            "gamma_star": self.gamma_star, "bracket_lo": self.bracket_lo, "bracket_hi": self.bracket_hi,
            "eigenvalue_at_star": self.eigenvalue_at_star, "eigen_gamma": self.eigen_gamma,
            "eigen_consistent": self.eigen_consistent, "blowup_bound_hit": self.blowup_bound_hit,
            "steps": self.steps,
        }


def gamma_star(A: Anisotropy, alpha: float, grid: SphereGrid, cfg: QuadratureConfig | None = None,
               bracket: tuple[float, float] | None = None, tol: float = 1e-3, threads: int = 1,
               eigen_check: bool = True) -> GammaStarResult:
    """Bisection for the largest γ with a positive, bounded solution of L_γφ = 1.

    Indicator at γ: φ > 0 at every node and ‖φ‖_∞ < 10³·‖φ‖_∞ at the
    bracket's low end.  The cross-check locates the zero of the principal
    eigenvalue λ₀(γ) with Brent's method.
    """
    G = _build_geometry(A, alpha, grid, cfg or QuadratureConfig(), threads)
    return _gamma_star(G, bracket, tol, eigen_check)


def _gamma_star(G: _Geometry, bracket, tol: float, eigen_check: bool) -> GammaStarResult:
    A = G.A
    lo, hi = bracket if bracket is not None else (1e-3, A.c - 1e-3)
    if not (0 < lo < hi < A.c):
        raise ParameterError(f"bracket must satisfy 0 < lo < hi < c = {A.c:g}")
    if not (tol > 0):
        raise ParameterError("tol must be > 0")
    history = []
    base = solve_homogeneous_poisson(_assemble(G, lo))
    ref = base.info["max_abs"]
    bound_hit = False

    def indicator(g):
        nonlocal bound_hit
        sol = base if g == lo else solve_homogeneous_poisson(_assemble(G, g))
        pos = bool(np.all(sol.values > 0))
        bounded = sol.info["max_abs"] < BLOWUP_FACTOR * ref
        if pos and not bounded:
            bound_hit = True
        ok = pos and bounded
        history.append((float(g), ok, sol.info["min_value"], sol.info["max_abs"]))
        return ok

    ind_lo, ind_hi = indicator(lo), indicator(hi)
    if ind_lo == ind_hi or not ind_lo:
        raise BracketError(f"no sign change of the positivity indicator on [{lo}, {hi}]: "
                           f"indicator(lo) = {ind_lo}, indicator(hi) = {ind_hi}")
    a, b = lo, hi
    steps = 0
    while b - a > tol:
        m = 0.5 * (a + b)
        if indicator(m):
            a = m
        else:
            b = m
        steps += 1
    gs = 0.5 * (a + b)
    lam_star = principal_eigenpair(_assemble(G, gs))[0]
    eg, consistent = None, False
    if eigen_check:
        lam = lambda g: principal_eigenpair(_assemble(G, g))[0]
        la, lb = lam(lo), lam(hi)
        if la * lb < 0:
            eg = float(brentq(lam, lo, hi, xtol=0.1 * tol))
            consistent = abs(eg - gs) <= 2 * tol
    return GammaStarResult(float(gs), float(a), float(b), float(lam_star), eg, bool(consistent),
                           bool(bound_hit), steps, history)


# ---------------------------------------------------------------------------
# Fundamental solution


def _beta_sphere_profile(Psi: HomogeneousProfile, theta):
    """g(θ) = Ψ at the β-sphere point on the orbit of e_θ."""
    A = Psi.grid.anisotropy
    e = np.stack([np.cos(theta), np.sin(theta)], axis=-1)
    r = np.asarray(quasi_norm(e, A))
    return Psi(e * (1.0 / r[..., None]) ** A.exponents)


def beta_sphere_extrema(Psi: HomogeneousProfile, samples_per_cell: int = 16):
    """(min, max) of the induced field over ∂Θ^β_1, refined cell by cell."""
    if Psi.grid.anisotropy.n != 2:
        raise ParameterError("β-sphere extrema are implemented for n = 2")
    N = Psi.grid.size
    h = 2 * np.pi / N
    th = np.arange(N * samples_per_cell) * h / samples_per_cell
    g = _beta_sphere_profile(Psi, th)
    out = []
    for sign in (1.0, -1.0):
        best = sign * g
        j = int(np.argmax(best))
        c = th[j]
        cand = [float(best[j])]
        for a, b in ((c - h, c), (c, c + h)):
            r = minimize_scalar(lambda t: -sign * float(_beta_sphere_profile(Psi, np.array([t]))[0]),
                                bounds=(a, b), method="bounded", options={"xatol": 1e-13})
            cand.append(-float(r.fun))
        out.append(sign * max(cand))
    return out[1], out[0]


def fundamental_solution(A: Anisotropy, alpha: float, grid: SphereGrid, cfg: QuadratureConfig | None = None,
                         tol: float = 1e-3, threads: int = 1, seed=0, gs: GammaStarResult | None = None) -> HomogeneousProfile:
    """Principal eigenfunction of L_{γ*}, normalised to sup 1 on the β-sphere."""
    G = _build_geometry(A, alpha, grid, cfg or QuadratureConfig(), threads)
    gs = gs or _gamma_star(G, None, tol, eigen_check=False)
    P = _assemble(G, gs.gamma_star)
    lam, v, res = principal_eigenpair(P, seed=seed)
    if not np.all(v > 0):
        raise SolverError("principal eigenvector is not single-signed")
    Psi = HomogeneousProfile(grid, v, gs.gamma_star, positive=True)
    lo, hi = beta_sphere_extrema(Psi)
    v = v / hi
    info = {"gamma_star": gs.gamma_star, "bracket_lo": gs.bracket_lo, "bracket_hi": gs.bracket_hi,
            "eigenvalue_at_star": lam, "eigen_residual": res / hi,
            "harmonic_residual": float(np.max(np.abs(P.apply(v)))) / float(np.max(v)),
            "m0": lo / hi}
    Psi = HomogeneousProfile(grid, v, gs.gamma_star, positive=True, info=info)
    info["harnack_ratio"] = harnack_ratio(Psi)
    return Psi


def two_sided_bounds(Psi: HomogeneousProfile, samples: int = 1000, seed=0, m0: float | None = None) -> dict:
    """Worst slack of m₀‖x‖_β^{−γ} ≤ Ψ(x) ≤ ‖x‖_β^{−γ} at seeded random points.

    Points are T_λ-dilations of random directions with λ log-uniform in
    [2^{−4}, 2^4]; slacks are relative to ‖x‖_β^{−γ} (positive = violation).
    """
    A = Psi.grid.anisotropy
    m0 = Psi.info.get("m0") if m0 is None else m0
    if m0 is None:
        raise ParameterError("m0 is required for profiles without fundamental-solution info")
    rng = np.random.default_rng(seed)
    d = rng.standard_normal((int(samples), A.n))
    d /= np.linalg.norm(d, axis=1, keepdims=True)
    x = scale_map(d, A, 2.0 ** rng.uniform(-4, 4, int(samples)))
    ref = np.asarray(quasi_norm(x, A)) ** (-Psi.gamma)
    val = np.asarray(Psi(x))
    return {"samples": int(samples), "m0": float(m0),
            "upper_violation": float(np.max(val / ref - 1.0)),
            "lower_violation": float(np.max(m0 - val / ref)),
            "min_value": float(np.min(val))}


def harnack_ratio(Psi: HomogeneousProfile) -> float:
    v = np.asarray(Psi.values)
    if not np.all(v > 0):
        raise DomainError("Harnack ratio needs a positive profile")
    return float(v.max() / v.min())


def holder_seminorm_of_psi(Psi: HomogeneousProfile, theta: float, pairs: int = 10_000, seed=0,
                           domain: str = "annulus") -> float:
    """Sampled sup of |Ψ(x) − Ψ(y)| / ‖x − y‖_β^θ over pairs with ‖x − y‖_β ≤ 1.

    ``domain="annulus"`` draws x, y from 1/2 ≤ ‖·‖_β ≤ 2; ``domain="sphere"``
    draws both from ∂Θ^β_1, which isolates the angular profile.
    """
    A = Psi.grid.anisotropy
    if not (0 < theta <= A.alpha_max):
        raise ParameterError(f"theta must lie in (0, 2/b_max = {A.alpha_max:g}]")
    if domain not in ("annulus", "sphere"):
        raise ParameterError("domain must be 'annulus' or 'sphere'")
    rng = np.random.default_rng(seed)

    def draw(m):
        d = rng.standard_normal((m, A.n))
        d /= np.linalg.norm(d, axis=1, keepdims=True)
        r = np.asarray(quasi_norm(d, A))
        x = d * (1.0 / r[:, None]) ** A.exponents
        if domain == "annulus":
            lam = 2.0 ** rng.uniform(-1.0, 1.0, m)
            x = x * lam[:, None] ** A.exponents
        return x

    best = 0.0
    chunk = 20_000
    left = int(pairs)
    while left > 0:
        m = min(chunk, left)
        x, y = draw(m), draw(m)
        # half the pairs are local perturbations so that short distances are probed
        loc = np.arange(m) % 2 == 1
        y[loc] = x[loc] + (rng.standard_normal((int(loc.sum()), A.n)) * 10.0 ** rng.uniform(-4, -1, (int(loc.sum()), 1)))
        if domain == "sphere":
            r = np.asarray(quasi_norm(y[loc], A))
            y[loc] = y[loc] * (1.0 / r[:, None]) ** A.exponents
        dist = np.asarray(quasi_norm(x - y, A))
        ok = (dist <= 1.0) & (dist > 0)
        if np.any(ok):
            q = np.abs(Psi(x[ok]) - Psi(y[ok])) / dist[ok] ** theta
            best = max(best, float(q.max()))
        left -= m
    return best

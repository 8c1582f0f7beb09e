"""Anisotropic metric geometry.

Everything here is built on the diagonal dilation group

    T_{β,r} x = (r^{2/b_1} x_1, ..., r^{2/b_n} x_n)

and the quasi-norm ‖x‖_{mβ} = (Σ |x_i|^{m b_i})^{1/2}.  Two charts are used
throughout the package:

* the *μβ-sphere chart*: x = T_ρ ω with ρ = ‖x‖_{μβ}^{1/μ} and ‖ω‖_{μβ} = 1;
* the *orbit chart*: x = T_s e with |e| = 1 (Euclidean).  In these
  coordinates Lebesgue measure factorises exactly,
  dx = s^{c-1} J(e) ds dS(e) with J(e) = Σ (2/b_i) e_i².

All array functions accept points stacked along the last axis.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np
from scipy.spatial import cKDTree
from scipy.special import gamma as gamma_fn

from .errors import DomainError, ParameterError, QuadratureError

__all__ = [
    "Anisotropy",
    "QuadPoint",
    "SphereGrid",
    "make_anisotropy",
    "quasi_norm",
    "orbit_radius",
    "cbl_distance",
    "scale_map",
    "project_to_sphere",
    "orbit_chart",
    "cone_density",
    "ellipsoid_contains",
    "ball_contains",
    "ellipsoid_volume",
    "unit_ball_volume",
    "build_sphere_grid",
    "quasi_triangle_constant",
    "inclusion_constant",
    "set_inclusion_check",
]


@dataclass(frozen=True)
class Anisotropy:
    """Exponent vector β with its derived quantities.

    Use :func:`make_anisotropy` rather than the constructor.
    """

    beta: tuple[float, ...]
    mu: int

    def __post_init__(self):
        b = np.asarray(self.beta, dtype=float)
        if b.ndim != 1 or b.size == 0 or not np.all(np.isfinite(b)) or np.any(b <= 0):
            raise ParameterError(f"beta entries must be finite and > 0, got {self.beta}")
        if int(self.mu) != self.mu or self.mu < 1:
            raise ParameterError(f"mu must be a positive integer, got {self.mu}")

    @property
    def n(self) -> int:
        return len(self.beta)

    @property
    def b(self) -> np.ndarray:
        return np.asarray(self.beta, dtype=float)

    @property
    def c(self) -> float:
        return float(np.sum(2.0 / self.b))

    @property
    def b_max(self) -> float:
        return float(np.max(self.b))

    @property
    def b_min(self) -> float:
        return float(np.min(self.b))

    @property
    def beta_star(self) -> np.ndarray:
        return (self.c / self.n) * self.b

    @property
    def exponents(self) -> np.ndarray:
        """Dilation exponents 2/b_i of T_{β,r}."""
        return 2.0 / self.b

    @property
    def alpha_max(self) -> float:
        """Upper end 2/b_max of the admissible α range."""
        return 2.0 / self.b_max

    def to_dict(self) -> dict:
        return {"beta": list(self.beta), "mu": self.mu}


class QuadPoint(NamedTuple):
    x: np.ndarray
    weight: float


def make_anisotropy(beta, mu_override: int | None = None) -> Anisotropy:
    """Build an :class:`Anisotropy`; μ defaults to the least integer with μ b_min ≥ 4."""
    b = np.asarray(beta, dtype=float).ravel()
    if b.size == 0 or not np.all(np.isfinite(b)) or np.any(b <= 0):
        raise ParameterError(f"beta entries must be finite and > 0, got {list(beta)}")
    if mu_override is not None:
        if int(mu_override) != mu_override or mu_override < 1:
            raise ParameterError(f"mu_override must be a positive integer, got {mu_override}")
        mu = int(mu_override)
    else:
        mu = int(math.ceil(4.0 / b.min() - 1e-12))
        mu = max(mu, 1)
    return Anisotropy(tuple(float(v) for v in b), mu)


def _as_points(x, A: Anisotropy) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    if x.shape[-1] != A.n:
        raise ParameterError(f"expected points of dimension {A.n}, got shape {x.shape}")
    return x


def quasi_norm(x, A: Anisotropy, multiplier: float = 1.0):
    """‖x‖_{mβ} = (Σ |x_i|^{m b_i})^{1/2}, vectorised over leading axes."""
    x = _as_points(x, A)
    val = np.sqrt(np.sum(np.abs(x) ** (multiplier * A.b), axis=-1))
    return float(val) if val.ndim == 0 else val


def scale_map(x, A: Anisotropy, r):
    """T_{β,r} x; ``r`` may be an array broadcasting against the leading axes."""
    x = _as_points(x, A)
    r = np.asarray(r, dtype=float)
    if np.any(r <= 0) or not np.all(np.isfinite(r)):
        raise ParameterError("scale factor r must be finite and > 0")
    return x * r[..., None] ** A.exponents


def orbit_radius(x, p) -> np.ndarray:
    """Solve Σ x_i² r^{-2 p_i} = 1 for r > 0 (r = 0 where x = 0).

    Newton in τ = log r.  The residual F(τ) = Σ x_i² e^{-2 p_i τ} − 1 is convex
    and decreasing, and the start τ0 = max_i log|x_i| / p_i has F(τ0) ≥ 0, so the
    iterates increase monotonically to the root without overshoot.
    """
    x = np.asarray(x, dtype=float)
    p = np.asarray(p, dtype=float)
    shape = x.shape[:-1]
    xf = x.reshape(-1, x.shape[-1])
    sq = xf * xf
    nz = np.any(sq > 0, axis=1)
    out = np.zeros(xf.shape[0])
    if np.any(nz):
        s = sq[nz]
        with np.errstate(divide="ignore"):
            logs = np.where(s > 0, 0.5 * np.log(np.where(s > 0, s, 1.0)), -np.inf)
        tau = np.max(logs / p, axis=1)
        done = np.zeros(tau.shape, dtype=bool)
        for _ in range(200):
            terms = s * np.exp(-2.0 * p * tau[:, None])
            F = terms.sum(axis=1) - 1.0
            dF = -2.0 * (terms * p).sum(axis=1)
            step = np.where(done, 0.0, -F / dF)
            tau = tau + step
            # the residual can stall at rounding level while steps stay just above 4e-16
            done |= (np.abs(step) <= 4e-16 * np.maximum(1.0, np.abs(tau))) | (np.abs(F) <= 2.5e-16 * x.shape[-1])
            if np.all(done):
                break
        else:  # pragma: no cover - monotone Newton always converges
            raise QuadratureError("orbit radius iteration failed to converge")
        out[nz] = np.exp(tau)
    out = out.reshape(shape)
    return float(out) if out.ndim == 0 else out


def cbl_distance(x, A: Anisotropy):
    """Implicit distance r_β(x): the root of Σ x_i² / r^{4/b*_i} = 1."""
    x = _as_points(x, A)
    return orbit_radius(x, 2.0 / A.beta_star)


def project_to_sphere(x, A: Anisotropy):
    """Return (ρ, ω) with ρ = ‖x‖_{μβ}^{1/μ}, ω = T_{1/ρ} x on ∂Θ^{μβ}_1."""
    x = _as_points(x, A)
    rho = np.asarray(quasi_norm(x, A, A.mu), dtype=float) ** (1.0 / A.mu)
    if np.any(rho == 0):
        raise DomainError("project_to_sphere is undefined at x = 0")
    omega = x * (1.0 / rho[..., None]) ** A.exponents
    return (float(rho) if rho.ndim == 0 else rho), omega


def orbit_chart(x, A: Anisotropy):
    """Return (s, e) with x = T_s e and |e| = 1."""
    x = _as_points(x, A)
    s = np.asarray(orbit_radius(x, A.exponents), dtype=float)
    if np.any(s == 0):
        raise DomainError("orbit chart is undefined at x = 0")
    e = x * (1.0 / s[..., None]) ** A.exponents
    return s, e


def cone_density(e, A: Anisotropy):
    """J(e) = Σ (2/b_i) e_i², the angular factor of dx = s^{c-1} J ds dS."""
    e = np.asarray(e, dtype=float)
    return np.sum(A.exponents * e * e, axis=-1)


def ellipsoid_contains(center, r: float, A: Anisotropy, y):
    """Membership in E_r(center) = {Σ (y_i − x_i)² / r^{4/b_i} < 1}."""
    if r <= 0:
        raise ParameterError("radius must be > 0")
    d = _as_points(y, A) - np.asarray(center, dtype=float)
    return np.sum(d * d / r ** (2.0 * A.exponents), axis=-1) < 1.0


def ball_contains(center, r: float, A: Anisotropy, y):
    """Membership in Θ_r(center) = {‖y − x‖_β < r}."""
    if r <= 0:
        raise ParameterError("radius must be > 0")
    d = _as_points(y, A) - np.asarray(center, dtype=float)
    return quasi_norm(d, A) < r


def inclusion_constant(A: Anisotropy) -> float:
    """C = max_i n^{b_i/4 + 1/2}, so that Θ_{r√n}(x) ⊂ E_{rC}(x)."""
    return float(np.max(A.n ** (A.b / 4.0 + 0.5)))


def set_inclusion_check(A: Anisotropy, r: float, samples: int = 10_000, seed=0, center=None) -> dict:
    """Count violations of E_r ⊂ Θ_{r√n} ⊂ E_{rC} at seeded random points.

    Half the points are uniform in the bounding box of E_r, half in the box
    of Θ_{r√n} (|y_i − x_i| < (r√n)^{2/b_i}), so both inclusions are probed
    near their boundaries.
    """
    if r <= 0:
        raise ParameterError("radius must be > 0")
    rng = np.random.default_rng(seed)
    x = np.zeros(A.n) if center is None else np.asarray(center, dtype=float)
    C = inclusion_constant(A)
    rt = r * math.sqrt(A.n)
    m = samples // 2
    y = np.concatenate([x + rng.uniform(-1, 1, (m, A.n)) * r ** A.exponents,
                        x + rng.uniform(-1, 1, (samples - m, A.n)) * rt ** A.exponents])
    inE = ellipsoid_contains(x, r, A, y)
    inT = ball_contains(x, rt, A, y)
    inEC = ellipsoid_contains(x, r * C, A, y)
    return {"samples": int(samples), "constant": C,
            "inner_violations": int(np.sum(inE & ~inT)),
            "outer_violations": int(np.sum(inT & ~inEC)),
            "inner_hits": int(np.sum(inE)), "outer_hits": int(np.sum(inT))}


def unit_ball_volume(n: int) -> float:
    return float(math.pi ** (n / 2.0) / gamma_fn(n / 2.0 + 1.0))


def ellipsoid_volume(r: float, A: Anisotropy) -> float:
    """|E_r| = |B_1| Π r^{2/b_i} = |B_1| r^c."""
    if r <= 0:
        raise ParameterError("radius must be > 0")
    return unit_ball_volume(A.n) * float(np.prod(r ** A.exponents))


def quasi_triangle_constant(A: Anisotropy, samples: int, seed=0):
    """Sampled quasi-triangle constant max ‖x+y‖/(‖x‖+‖y‖).

    Returns ``(estimate, bound)`` where ``bound = max(1, 2^{(b_max-1)/2})`` is
    an analytic upper estimate (not claimed tight).  Half of the pairs are
    independent, half nearly parallel, since the extremal pairs are aligned.
    """
    if samples < 1000:
        raise ParameterError("samples must be at least 1000")
    rng = np.random.default_rng(seed)
    n = A.n
    half = samples // 2
    g = rng.standard_normal((samples, n))
    e = g / np.linalg.norm(g, axis=1, keepdims=True)
    x = scale_map(e, A, np.exp(rng.uniform(-3, 3, samples)))
    g2 = rng.standard_normal((samples, n))
    e2 = g2 / np.linalg.norm(g2, axis=1, keepdims=True)
    near = e[:half] + 0.05 * rng.standard_normal((half, n))
    near /= np.linalg.norm(near, axis=1, keepdims=True)
    e2[:half] = near
    t2 = np.exp(rng.uniform(-3, 3, samples))
    t2[:half] = np.exp(np.log(np.maximum(quasi_norm(x[:half], A), 1e-300)) + rng.uniform(-0.2, 0.2, half))
    y = scale_map(e2, A, t2)
    ratio = quasi_norm(x + y, A) / (quasi_norm(x, A) + quasi_norm(y, A))
    bound = max(1.0, 2.0 ** ((A.b_max - 1.0) / 2.0))
    # the pair (x, 0) attains 1
    return max(1.0, float(np.max(ratio))), bound


# ---------------------------------------------------------------------------
# Sphere grids


@dataclass(frozen=True, eq=False)
class SphereGrid:
    """Quadrature nodes on ∂Θ^{μβ}_1.

    ``base`` are unit Euclidean vectors e_j and ``points`` the nodes
    ω_j = T_{1/ρ(e_j)} e_j on the μβ-sphere.  ``weights`` is the numerical
    surface measure of the μβ-sphere attached to each node; ``base_weights``
    is dS(e_j)·J(e_j), the weight that integrates against ds in the orbit
    chart.  ``node_radius`` stores ρ(e_j) = ‖e_j‖_{μβ}^{1/μ}.
    """

    anisotropy: Anisotropy
    resolution: int
    base: np.ndarray
    points: np.ndarray
    weights: np.ndarray
    base_weights: np.ndarray
    node_radius: np.ndarray
    simplices: np.ndarray | None = None
    _tree: object = field(default=None, repr=False)

    @property
    def size(self) -> int:
        return self.points.shape[0]

    @property
    def nodes(self) -> list[QuadPoint]:
        return [QuadPoint(p, float(w)) for p, w in zip(self.points, self.weights)]

    @property
    def angles(self) -> np.ndarray:
        """Base angles θ_j (n = 2 only)."""
        return np.arctan2(self.base[:, 1], self.base[:, 0]) % (2 * np.pi)

    def interpolation_weights(self, omega):
        """Convex weights over nearby nodes for points of the μβ-sphere.

        Returns ``(index, weight)`` arrays of shape (m, k); weights are
        nonnegative and sum to one.  Nonzero inputs off the sphere are
        projected along T-orbits first.
        """
        A = self.anisotropy
        omega = np.atleast_2d(np.asarray(omega, dtype=float))
        _, e = orbit_chart(omega, A)
        if A.n == 2:
            N = self.size
            t = (np.arctan2(e[:, 1], e[:, 0]) % (2 * np.pi)) * N / (2 * np.pi)
            j0 = np.floor(t).astype(int) % N
            f = t - np.floor(t)
            idx = np.stack([j0, (j0 + 1) % N], axis=1)
            w = np.stack([1.0 - f, f], axis=1)
            return idx, w
        return self._barycentric(e)

    def _barycentric(self, e):
        verts = self.base[self.simplices]  # (F, 3, 3)
        tree = self._tree
        k = min(12, self.simplices.shape[0])
        _, cand = tree.query(e, k=k)
        idx = np.empty((e.shape[0], 3), dtype=int)
        w = np.empty((e.shape[0], 3))
        found = np.zeros(e.shape[0], dtype=bool)
        for col in range(k):
            c = cand[:, col]
            V = verts[c]  # (m,3,3) rows are vertices
            lam = np.linalg.solve(np.transpose(V, (0, 2, 1)), e[..., None])[..., 0]
            ok = (~found) & np.all(lam >= -1e-12, axis=1)
            lam = np.clip(lam, 0.0, None)
            lam /= lam.sum(axis=1, keepdims=True)
            idx[ok] = self.simplices[c[ok]]
            w[ok] = lam[ok]
            found |= ok
            if found.all():
                break
        if not found.all():
            raise QuadratureError("interpolation coverage failure: point outside grid hull")
        return idx, w

    def interpolate(self, values, omega):
        idx, w = self.interpolation_weights(omega)
        return np.sum(np.asarray(values)[idx] * w, axis=1)


def _octahedral_sphere(k: int):
    """Vertices and triangles of an octahedron with k segments per edge, projected to S²."""
    verts: dict[tuple, int] = {}
    pts = []
    tris = []

    def vid(p):
        key = tuple(np.round(p, 12))
        if key not in verts:
            verts[key] = len(pts)
            pts.append(p)
        return verts[key]

    for sx in (1, -1):
        for sy in (1, -1):
            for sz in (1, -1):
                a, b, c = np.array([sx, 0, 0.0]), np.array([0, sy, 0.0]), np.array([0, 0, sz * 1.0])
                grid = {}
                for i in range(k + 1):
                    for j in range(k + 1 - i):
                        p = (i * b + j * c + (k - i - j) * a) / k
                        grid[(i, j)] = vid(p)
                for i in range(k):
                    for j in range(k - i):
                        tris.append((grid[(i, j)], grid[(i + 1, j)], grid[(i, j + 1)]))
                        if i + j < k - 1:
                            tris.append((grid[(i + 1, j)], grid[(i + 1, j + 1)], grid[(i, j + 1)]))
    P = np.array(pts)
    P /= np.linalg.norm(P, axis=1, keepdims=True)
    return P, np.array(tris, dtype=int)


def _spherical_triangle_area(a, b, c):
    num = np.abs(np.einsum("ij,ij->i", a, np.cross(b, c)))
    den = 1 + np.einsum("ij,ij->i", a, b) + np.einsum("ij,ij->i", b, c) + np.einsum("ij,ij->i", c, a)
    return 2.0 * np.arctan2(num, den)


def _t_project(e, A):
    rho = quasi_norm(e, A, A.mu) ** (1.0 / A.mu)
    return e * (1.0 / rho[..., None]) ** A.exponents, rho


def build_sphere_grid(A: Anisotropy, resolution: int) -> SphereGrid:
    """Quadrature grid on ∂Θ^{μβ}_1 built from a quasi-uniform Euclidean grid.

    n = 2: ``resolution`` equal-angle nodes (θ_j = 2πj/N, so multiples of 4
    are invariant under sign flips).  n = 3: octahedral triangulation with at
    least ``resolution`` vertices.  Base nodes are carried to the μβ-sphere
    along T-orbits; weights are Euclidean patch measure times the numerical
    (central-difference) Jacobian of that map.
    """
    if int(resolution) != resolution or resolution < 8:
        raise ParameterError(f"resolution must be an integer ≥ 8, got {resolution}")
    resolution = int(resolution)
    n = A.n
    h = 1e-6
    if n == 2:
        N = resolution
        th = 2 * np.pi * np.arange(N) / N
        base = np.stack([np.cos(th), np.sin(th)], axis=1)
        pts, rho = _t_project(base, A)
        fwd, _ = _t_project(np.stack([np.cos(th + h), np.sin(th + h)], axis=1), A)
        bwd, _ = _t_project(np.stack([np.cos(th - h), np.sin(th - h)], axis=1), A)
        jac = np.linalg.norm(fwd - bwd, axis=1) / (2 * h)
        dS = np.full(N, 2 * np.pi / N)
        weights = dS * jac
        return SphereGrid(A, resolution, base, pts, weights, dS * cone_density(base, A), rho)
    if n == 3:
        k = max(1, int(math.ceil(math.sqrt(max(resolution - 2, 1) / 4.0))))
        base, tris = _octahedral_sphere(k)
        area = _spherical_triangle_area(base[tris[:, 0]], base[tris[:, 1]], base[tris[:, 2]])
        dS = np.zeros(base.shape[0])
        for col in range(3):
            np.add.at(dS, tris[:, col], area / 3.0)
        pts, rho = _t_project(base, A)
        # orthonormal tangent frame at each base node
        ref = np.where(np.abs(base[:, :1]) < 0.9, np.array([[1.0, 0, 0]]), np.array([[0, 1.0, 0]]))
        t1 = np.cross(base, ref)
        t1 /= np.linalg.norm(t1, axis=1, keepdims=True)
        t2 = np.cross(base, t1)

        def move(t, s):
            q = base + s * t
            return _t_project(q / np.linalg.norm(q, axis=1, keepdims=True), A)[0]

        d1 = (move(t1, h) - move(t1, -h)) / (2 * h)
        d2 = (move(t2, h) - move(t2, -h)) / (2 * h)
        jac = np.linalg.norm(np.cross(d1, d2), axis=1)
        cent = base[tris].mean(axis=1)
        tree = cKDTree(cent / np.linalg.norm(cent, axis=1, keepdims=True))
        return SphereGrid(A, resolution, base, pts, dS * jac, dS * cone_density(base, A), rho, tris, tree)
    raise ParameterError(f"sphere grids are implemented for n = 2 and n = 3, got n = {n}")

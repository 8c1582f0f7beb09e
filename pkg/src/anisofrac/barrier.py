"""Barrier fields u_γ = ‖x‖_{μβ}^{−γ/μ}, anisotropic cones and the (α, γ) sweep."""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .errors import AnisofracError, DomainError, ParameterError
from .geometry import Anisotropy, SphereGrid, quasi_norm, scale_map
from .operator import ERROR_SENTINEL, Field, QuadratureConfig, eval_operator

__all__ = [
    "BarrierField",
    "ConeSpec",
    "SweepRow",
    "SweepResult",
    "barrier",
    "barrier_gradient",
    "barrier_hessian",
    "make_cone",
    "cone_membership",
    "cone_complement_measure",
    "delta0_threshold",
    "barrier_sweep",
    "default_alpha_grid",
    "default_gamma_grid",
    "gk_truncation",
]


@dataclass(frozen=True, eq=False)
class BarrierField:
    anisotropy: Anisotropy
    gamma: float
    field: Field

    @property
    def b_tilde(self) -> np.ndarray:
        return self.anisotropy.mu * self.anisotropy.b

    @property
    def gamma_tilde(self) -> float:
        return self.gamma / self.anisotropy.mu

    def __call__(self, x):
        return self.field(x)


def barrier(A: Anisotropy, gamma: float) -> BarrierField:
    """u_γ(x) = ‖x‖_{μβ}^{−γ/μ}: homogeneous of degree −γ, equal to 1 on ∂Θ^{μβ}_1."""
    if not (gamma > 0):
        raise ParameterError(f"gamma must be > 0, got {gamma}")
    mu = A.mu
    holder: dict = {}

    def func(x):
        return np.asarray(quasi_norm(x, A, mu)) ** (-gamma / mu)

    field = Field(func, homogeneity=-float(gamma), decay_class="homogeneous",
                  hessian=lambda x: barrier_hessian(holder["B"], x),
                  smooth=lambda x: bool(np.any(np.asarray(x) != 0)), name="barrier")
    B = BarrierField(A, float(gamma), field)
    holder["B"] = B
    return B


def _check_point(x, A):
    x = np.asarray(x, dtype=float).ravel()
    if x.size != A.n:
        raise ParameterError(f"point has dimension {x.size}, expected {A.n}")
    if not np.any(x != 0):
        raise DomainError("the barrier is singular at x = 0")
    return x


def barrier_gradient(B: BarrierField, x) -> np.ndarray:
    A = B.anisotropy
    x = _check_point(x, A)
    bt, gt = B.b_tilde, B.gamma_tilde
    S = float(np.sum(np.abs(x) ** bt))
    g = bt * np.abs(x) ** (bt - 2) * x
    return -0.5 * gt * S ** (-0.5 * gt - 1) * g


def barrier_hessian(B: BarrierField, x) -> np.ndarray:
    """Exact Hessian of u_γ, with b̃ = μβ and γ̃ = γ/μ.

    Off-diagonal:  γ̃(γ̃+2)/4 ‖x‖^{−γ̃−4} (b̃_i|x_i|^{b̃_i−2}x_i)(b̃_j|x_j|^{b̃_j−2}x_j)
    Diagonal:      γ̃/4 ‖x‖^{−γ̃−4} { b̃_i²|x_i|^{2(b̃_i−1)}(γ̃+2) − ‖x‖² 2b̃_i(b̃_i−1)|x_i|^{b̃_i−2} }
    where ‖x‖ = ‖x‖_{μβ}.
    """
    A = B.anisotropy
    x = _check_point(x, A)
    bt, gt = B.b_tilde, B.gamma_tilde
    ax = np.abs(x)
    nrm = math.sqrt(float(np.sum(ax ** bt)))
    g = bt * ax ** (bt - 2) * x
    H = 0.25 * gt * (gt + 2) * nrm ** (-gt - 4) * np.outer(g, g)
    diag = 0.25 * gt * nrm ** (-gt - 4) * (bt ** 2 * ax ** (2 * (bt - 1)) * (gt + 2)
                                           - nrm ** 2 * 2 * bt * (bt - 1) * ax ** (bt - 2))
    H[np.diag_indices(A.n)] = diag
    return H


# ---------------------------------------------------------------------------
# Cones


@dataclass(frozen=True)
class ConeSpec:
    """Ω^{β,δ}_x = {y : |⟨x,y⟩_x| ≤ (1−δ)‖x‖_x‖y‖_x} with weights d_i(x)."""

    anisotropy: Anisotropy
    apex: tuple[float, ...]
    delta: float

    def __post_init__(self):
        if not (0.0 < self.delta < 1.0):
            raise ParameterError(f"delta must lie in (0, 1), got {self.delta}")

    @property
    def d(self) -> np.ndarray:
        x = np.asarray(self.apex)
        b = self.anisotropy.b
        with np.errstate(divide="ignore"):
            return np.where(x != 0, np.abs(x) ** (b - 2), 1.0)


def make_cone(x, A: Anisotropy, delta: float) -> ConeSpec:
    """Cone with apex direction x carried to ∂Θ^β_1 along its T-orbit."""
    x = np.asarray(x, dtype=float).ravel()
    if not np.any(x != 0):
        raise DomainError("cone apex must be nonzero")
    apex = scale_map(x, A, 1.0 / quasi_norm(x, A))
    return ConeSpec(A, tuple(float(v) for v in apex), float(delta))


def cone_membership(C: ConeSpec, y):
    y = np.asarray(y, dtype=float)
    x, d = np.asarray(C.apex), C.d
    ip = np.sum(d * x * y, axis=-1)
    nx = math.sqrt(float(np.sum(d * x * x)))
    ny = np.sqrt(np.sum(d * y * y, axis=-1))
    return np.abs(ip) <= (1.0 - C.delta) * nx * ny


def cone_complement_measure(A: Anisotropy, delta: float, grid: SphereGrid, x) -> float:
    """Grid measure of the sphere nodes outside Ω^{β,δ}_x.

    The complement {|⟨x,y⟩_x| > (1−δ)‖x‖_x‖y‖_x} grows with δ, so the
    measure is nondecreasing in δ.
    """
    if grid.resolution < 64:
        raise ParameterError("cone measures need a grid resolution ≥ 64")
    C = make_cone(x, A, delta)
    outside = ~cone_membership(C, grid.points)
    return float(np.sum(grid.weights[outside]))


def delta0_threshold(A: Anisotropy, grid: SphereGrid, c0: float, deltas) -> float | None:
    """Largest δ in ``deltas`` with complement measure ≤ c0·|sphere|/(2n) at every grid apex."""
    total = float(np.sum(grid.weights))
    bound = c0 * total / (2 * A.n)
    best = None
    for delta in sorted(deltas):
        worst = max(cone_complement_measure(A, delta, grid, p) for p in grid.points)
        if worst <= bound:
            best = float(delta)
        else:
            break
    return best


# ---------------------------------------------------------------------------
# Sweep


@dataclass(frozen=True)
class SweepRow:
    alpha: float
    gamma: float
    min_value: float
    argmin_node: int
    error_flag: int


@dataclass(frozen=True)
class SweepResult:
    rows: list[SweepRow]
    alpha0: dict
    trend: dict

    def table(self) -> list[list]:
        return [[r.alpha, r.gamma, r.min_value, r.argmin_node, r.error_flag] for r in self.rows]


def default_alpha_grid(A: Anisotropy, points: int = 12) -> list[float]:
    return list(np.linspace(0.5, 0.98, points) * A.alpha_max)


def default_gamma_grid(A: Anisotropy) -> list[float]:
    return [g * min(1.0, A.c / 2) for g in (0.05, 0.1, 0.25, 0.5, 1.0, 1.5)]


def _orbit_representatives(grid: SphereGrid) -> tuple[np.ndarray, np.ndarray]:
    """Nodes with all coordinates ≥ 0 plus a map from every node to its representative.

    Δu_γ is even in each coordinate, so one node per sign orbit suffices.
    """
    key = {tuple(np.round(np.abs(p), 13)): i for i, p in enumerate(grid.points) if np.all(p >= -1e-15)}
    rep = np.array([key.get(tuple(np.round(np.abs(p), 13)), -1) for p in grid.points])
    if np.any(rep < 0):
        rep = np.arange(grid.size)
    return np.unique(rep), rep


def barrier_sweep(A: Anisotropy, alpha_grid, gamma_grid, grid: SphereGrid,
                  cfg: QuadratureConfig | None = None, threads: int = 1) -> SweepResult:
    """m(α, γ) = min over grid nodes of Δ^{β,α}u_γ, one row per (α, γ) cell.

    ``error_flag`` is 1 when any node evaluation was flagged or failed, or
    when the minimum is smaller than its own error estimate.
    """
    alpha_grid = [float(a) for a in alpha_grid]
    gamma_grid = [float(g) for g in gamma_grid]
    if not alpha_grid or not gamma_grid:
        raise ParameterError("alpha and gamma grids must be nonempty")
    for a in alpha_grid:
        if not (0 < a < A.alpha_max):
            raise ParameterError(f"alpha = {a} outside (0, 2/b_max = {A.alpha_max:g})")
    for g in gamma_grid:
        if not (0 < g < A.c):
            raise ParameterError(f"gamma = {g} outside (0, c = {A.c:g})")
    cfg = cfg or QuadratureConfig()
    reps, rep_of = _orbit_representatives(grid)
    tasks = [(a, g, int(j)) for a in alpha_grid for g in gamma_grid for j in reps]
    fields = {g: barrier(A, g).field for g in gamma_grid}

    def work(task):
        a, g, j = task
        try:
            r = eval_operator(fields[g], grid.points[j], A, a, cfg)
            return r.value, r.error_estimate, r.flagged
        except AnisofracError:
            return math.nan, ERROR_SENTINEL, True

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(work, tasks))
    else:
        results = [work(t) for t in tasks]
    per_node = {}
    for (a, g, j), res in zip(tasks, results):
        per_node[(a, g, j)] = res
    rows = []
    for a in alpha_grid:
        for g in gamma_grid:
            vals = np.array([per_node[(a, g, int(rep_of[i]))][0] for i in range(grid.size)])
            errs = np.array([per_node[(a, g, int(rep_of[i]))][1] for i in range(grid.size)])
            flags = np.array([per_node[(a, g, int(rep_of[i]))][2] for i in range(grid.size)])
            if np.all(np.isnan(vals)):
                rows.append(SweepRow(a, g, math.nan, -1, 1))
                continue
            i = int(np.nanargmin(vals))
            flag = int(bool(np.any(flags) or np.any(np.isnan(vals)) or abs(vals[i]) <= errs[i]))
            rows.append(SweepRow(a, g, float(vals[i]), i, flag))
    alpha0, trend = {}, {}
    for g in gamma_grid:
        col = [r for r in rows if r.gamma == g]
        pos = [r.alpha for r in col if r.min_value > 0]
        alpha0[g] = min(pos) if pos else None
        m = [r.min_value for r in sorted(col, key=lambda r: r.alpha)]
        if len(m) >= 2:
            trend[g] = "increasing" if m[-1] > m[-2] else "decreasing" if m[-1] < m[-2] else "flat"
        else:
            trend[g] = "n/a"
    return SweepResult(rows, alpha0, trend)


def gk_truncation(t, k: int, gamma: float, alpha: float, A: Anisotropy):
    """g_k(t): 2^{(γ̃+2α̃)k} for t < 2^{−k}, t^{−(γ̃+2α̃)} up to 2^k, 0 beyond (γ̃ = γ/μ, α̃ = α/μ)."""
    if int(k) != k or k < 0:
        raise ParameterError("k must be a nonnegative integer")
    t = np.asarray(t, dtype=float)
    if np.any(t <= 0):
        raise ParameterError("t must be > 0")
    e = (gamma + 2 * alpha) / A.mu
    lo, hi = 2.0 ** (-k), 2.0 ** k
    out = np.where(t < lo, 2.0 ** (e * k), np.where(t < hi, t ** (-e), 0.0))
    return float(out) if out.ndim == 0 else out

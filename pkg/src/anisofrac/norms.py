"""Ellipsoid averages, Campanato/Hölder/Gagliardo seminorms and Bessel norms.

Sampled suprema are reported together with a saturation indicator: the
relative change of the estimate between the first half of the samples and
all of them.  Random streams come from ``numpy.random.SeedSequence(seed)``
split into a fixed number of chunks, so results do not depend on the
number of worker threads.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np
from scipy.interpolate import RegularGridInterpolator

from .errors import DomainError, ParameterError
from .geometry import Anisotropy, cbl_distance, cone_density, ellipsoid_volume, quasi_norm, scale_map
from .operator import Field
from .quadrature import angular_rule, gauss_jacobi_left

__all__ = [
    "PeriodicSample",
    "SeminormReport",
    "DecayReport",
    "ellipsoid_average",
    "campanato_seminorm",
    "decay_oscillation_check",
    "holder_seminorm",
    "gagliardo_seminorm",
    "bessel_norm",
    "embedding_ratio",
    "embedding_family",
    "vanishing_at_infinity_check",
    "read_periodic_sample",
    "write_periodic_sample",
]

CHUNK = 4096


@dataclass(frozen=True)
class SeminormReport:
    value: float
    params: dict
    saturation: float
    flagged: bool = False

    def __post_init__(self):
        if not (self.value >= 0):
            raise ParameterError("seminorm values are nonnegative")


@dataclass(frozen=True, eq=False)
class PeriodicSample:
    """Values of a compactly supported function on the periodic grid of [−L, L)^n."""

    n: int
    L: float
    N: int
    values: np.ndarray

    def __post_init__(self):
        if self.N < 2 or self.N & (self.N - 1):
            raise ParameterError(f"grid size N must be a power of two, got {self.N}")
        if not (self.L > 0):
            raise ParameterError("box half-width L must be > 0")
        v = np.asarray(self.values, dtype=float)
        if v.size != self.N ** self.n:
            raise ParameterError(f"expected {self.N ** self.n} values, got {v.size}")
        object.__setattr__(self, "values", v.reshape((self.N,) * self.n))
        peak = float(np.max(np.abs(v))) if v.size else 0.0
        if peak > 0 and self.shell_max() >= 1e-6 * peak:
            raise DomainError("sample is not contained in the box: boundary shell exceeds 1e-6·max|u|")

    @property
    def h(self) -> float:
        return 2.0 * self.L / self.N

    @property
    def axis(self) -> np.ndarray:
        return -self.L + self.h * np.arange(self.N)

    def shell_max(self) -> float:
        v = np.abs(self.values)
        out = 0.0
        for ax in range(self.n):
            out = max(out, float(np.max(np.take(v, [0, self.N - 1], axis=ax))))
        return out

    @classmethod
    def from_function(cls, func, n: int, L: float, N: int) -> "PeriodicSample":
        axes = [-L + (2.0 * L / N) * np.arange(N)] * n
        mesh = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, n)
        return cls(n, float(L), int(N), np.asarray(func(mesh), dtype=float))

    def as_field(self) -> Field:
        """Multilinear interpolant, zero outside the box."""
        axes = [np.append(self.axis, self.L)] * self.n
        vals = np.pad(self.values, [(0, 1)] * self.n, mode="wrap")
        interp = RegularGridInterpolator(axes, vals, bounds_error=False, fill_value=0.0)
        return Field(interp, decay_class="compact", support_radius=self.L * math.sqrt(self.n), name="sample")


def write_periodic_sample(path, s: PeriodicSample) -> None:
    with open(path, "w") as fh:
        fh.write(f"{s.n} {s.N} {float(s.L)!r}\n")
        for v in s.values.ravel():
            fh.write(f"{float(v)!r}\n")


def read_periodic_sample(path) -> PeriodicSample:
    with open(path) as fh:
        head = fh.readline().split()
        if len(head) != 3:
            raise ParameterError("sample header must read 'n N L'")
        n, N, L = int(head[0]), int(head[1]), float(head[2])
        vals = np.array([float(t) for line in fh for t in line.split()])
    return PeriodicSample(n, L, N, vals)


# ---------------------------------------------------------------------------
# Ellipsoid averages


def _ball_rule(n: int, radial: int, panels: int, order: int):
    """Nodes and weights on the unit Euclidean ball, weights summing to |B_1|."""
    rho, wr = gauss_jacobi_left(1.0, n - 1.0, radial)
    if n == 1:
        pts = np.concatenate([rho, -rho])[:, None]
        return pts, np.concatenate([wr, wr])
    f, wf = angular_rule(n, panels, order)
    pts = (rho[:, None, None] * f[None, :, :]).reshape(-1, n)
    return pts, (wr[:, None] * wf[None, :]).ravel()


def ellipsoid_average(u: Field, x, r: float, A: Anisotropy, method: str = "tensor-quad",
                      budget: int | None = None, seed=0, full_output: bool = False):
    """u_{x,r}: mean of u over E_r(x) = x + diag(r^{2/b_i}) B_1.

    ``tensor-quad`` maps a Gauss rule on the unit ball (``budget`` radial
    points, default 24) and estimates the error against ``budget + 8``
    points; ``monte-carlo`` uses ``budget`` seeded uniform samples
    (default 10⁵) and the standard error.  With ``full_output`` returns
    (value, error, flagged), flagged meaning the error exceeds 1e−6 relative.
    """
    if not (r > 0):
        raise ParameterError("r must be > 0")
    x = np.asarray(x, dtype=float).ravel()
    axes = r ** A.exponents
    if method == "tensor-quad":
        m = int(budget or 24)
        vals = []
        for rad in (m, m + 8):
            pts, w = _ball_rule(A.n, rad, 4, 12)
            vals.append(float(np.sum(w * u(x + pts * axes))) / float(np.sum(w)))
        value, err = vals[1], abs(vals[1] - vals[0])
    elif method == "monte-carlo":
        m = int(budget or 100_000)
        rng = np.random.default_rng(seed)
        d = rng.standard_normal((m, A.n))
        d /= np.linalg.norm(d, axis=1, keepdims=True)
        pts = d * rng.random(m)[:, None] ** (1.0 / A.n)
        v = u(x + pts * axes)
        value, err = float(np.mean(v)), float(np.std(v) / math.sqrt(m))
    else:
        raise ParameterError("method must be 'tensor-quad' or 'monte-carlo'")
    if full_output:
        return value, err, bool(err > 1e-6 * max(abs(value), 1e-300))
    return value


def _ellipsoid_oscillation(u, x, r, A, q, pts, w):
    """(u_{x,r}, ∫_{E_r(x)} |u − u_{x,r}|^q) with a fixed ball rule."""
    v = u(x + pts * r ** A.exponents)
    vol = ellipsoid_volume(r, A)
    avg = float(np.sum(w * v)) / float(np.sum(w))
    osc = vol * float(np.sum(w * np.abs(v - avg) ** q)) / float(np.sum(w))
    return avg, osc


def _centers(n, count, box, seed):
    rng = np.random.default_rng(np.random.SeedSequence(seed))
    return rng.uniform(-box, box, (count, n))


def campanato_seminorm(u: Field, A: Anisotropy, q: float, alpha: float, centers: int = 64,
                       radii=(1.0, 0.5, 0.25, 0.125), seed=0, box: float = 1.0) -> SeminormReport:
    """Sampled sup over centers in [−box, box]^n and the radii of r^{−αq}∫_{E_r}|u − u_{x,r}|^q.

    The value is the q-th power [u]^q; saturation compares the first half
    of the centers with all of them.
    """
    if q < 1:
        raise ParameterError("q must be ≥ 1")
    if not (alpha > 0):
        raise ParameterError("alpha must be > 0")
    radii = [float(r) for r in radii]
    if not radii or min(radii) <= 0:
        raise ParameterError("radii must be positive")
    C = _centers(A.n, 2 * int(centers), box, seed)
    pts, w = _ball_rule(A.n, 24, 4, 12)
    vals = np.array([max(r ** (-alpha * q) * _ellipsoid_oscillation(u, c, r, A, q, pts, w)[1] for r in radii)
                     for c in C])
    full, half = float(vals.max()), float(vals[:centers].max())
    sat = (full - half) / full if full > 0 else 0.0
    return SeminormReport(full, {"centers": int(centers), "radii": radii, "seed": seed, "box": box,
                                 "q": q, "alpha": alpha}, sat)


@dataclass(frozen=True)
class DecayReport:
    rows: list          # (R, r, |u_{x0,R} − u_{x0,r}|, ratio to [u]·R^θ)
    slope: float
    theta: float
    seminorm: float

    @property
    def ratio_spread(self) -> float:
        ratios = [row[3] for row in self.rows if row[3] > 0]
        return max(ratios) / min(ratios) if ratios else 1.0


def decay_oscillation_check(u: Field, A: Anisotropy, q: float, alpha: float, x0, R_list,
                            seminorm: float | None = None, seed=0) -> DecayReport:
    """|u_{x0,R} − u_{x0,r}| on consecutive radii and its log-log slope against R."""
    R_list = [float(r) for r in R_list]
    if len(R_list) < 2 or any(b >= a for a, b in zip(R_list, R_list[1:])):
        raise ParameterError("R_list must be strictly decreasing with at least two radii")
    theta = alpha - A.c / q
    if not (theta > 0):
        raise ParameterError(f"theta = alpha − c/q = {theta:g} must be > 0")
    x0 = np.asarray(x0, dtype=float).ravel()
    if seminorm is None:
        seminorm = campanato_seminorm(u, A, q, alpha, radii=R_list, seed=seed).value ** (1.0 / q)
    avgs = [ellipsoid_average(u, x0, R, A, budget=48) for R in R_list]
    rows = []
    for (R, a), (r, b) in zip(zip(R_list, avgs), zip(R_list[1:], avgs[1:])):
        d = abs(a - b)
        scale = seminorm * R ** theta
        rows.append((R, r, d, d / scale if scale > 0 else 0.0))
    d = np.array([row[2] for row in rows])
    R = np.array([row[0] for row in rows])
    if np.all(d > 0) and len(rows) >= 2:
        slope = float(np.polyfit(np.log(R), np.log(d), 1)[0])
    else:
        slope = math.nan
    return DecayReport(rows, slope, theta, float(seminorm))


# ---------------------------------------------------------------------------
# Hölder seminorm


def _run_chunks(fn, seed, total, threads):
    """Evaluate fn(rng, size) on fixed-size chunks with spawned streams, in order."""
    sizes = [CHUNK] * (total // CHUNK) + ([total % CHUNK] if total % CHUNK else [])
    streams = np.random.SeedSequence(seed).spawn(len(sizes))
    jobs = [(np.random.default_rng(s), m) for s, m in zip(streams, sizes)]
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            return list(pool.map(lambda j: fn(*j), jobs))
    return [fn(*j) for j in jobs]


def holder_seminorm(u: Field, A: Anisotropy, theta: float, pairs: int = 20_000, seed=0,
                    max_pair_distance: float | None = None, box: float = 1.0, threads: int = 1) -> SeminormReport:
    """Sampled sup of |u(x) − u(y)| / ‖x − y‖_β^θ.

    First points are drawn as T_λ e with λ log-uniform in [10^{−4}·box, box]
    (so points near the origin are visited), second points as x + T_t f with
    t log-uniform up to the pair distance; half the pairs use an independent
    uniform second point instead.
    """
    if not (0 < theta <= 1):
        raise ParameterError("theta must lie in (0, 1]")
    dmax = float(max_pair_distance) if max_pair_distance is not None else 2.0 * box * math.sqrt(A.n)
    p = A.exponents

    def chunk(rng, m):
        d = rng.standard_normal((m, A.n))
        d /= np.linalg.norm(d, axis=1, keepdims=True)
        lam = box * 10.0 ** rng.uniform(-4, 0, m)
        x = np.where(rng.random((m, 1)) < 0.5, d * lam[:, None] ** p, rng.uniform(-box, box, (m, A.n)))
        f = rng.standard_normal((m, A.n))
        f /= np.linalg.norm(f, axis=1, keepdims=True)
        t = dmax * 10.0 ** rng.uniform(-5, 0, m)
        y_loc = x + f * t[:, None] ** p
        y_far = rng.uniform(-box, box, (m, A.n))
        y = np.where((np.arange(m) % 2 == 0)[:, None], y_loc, y_far)
        dist = np.asarray(quasi_norm(x - y, A))
        ok = (dist > 0) & (dist <= dmax)
        if not np.any(ok):
            return 0.0
        return float(np.max(np.abs(u(x[ok]) - u(y[ok])) / dist[ok] ** theta))

    vals = _run_chunks(chunk, seed, int(pairs), threads)
    full = max(vals) if vals else 0.0
    half = max(vals[: max(1, len(vals) // 2)]) if vals else 0.0
    sat = (full - half) / full if full > 0 else 0.0
    return SeminormReport(full, {"pairs": int(pairs), "seed": seed, "theta": theta, "box": box,
                                 "max_pair_distance": dmax}, sat)


# ---------------------------------------------------------------------------
# Gagliardo seminorm


def gagliardo_seminorm(u, A: Anisotropy, q: float, alpha: float, budget: int = 200_000, seed=0,
                       box: float | None = None, threads: int = 1) -> SeminormReport:
    """‖u‖_q + (∫∫ |u(z) − u(h)|^q ‖z − h‖_β^{−c−αq} dz dh)^{1/q} by Monte Carlo.

    z is uniform in the support box S = [−box, box]^n; the offset h − z = T_t f
    is sampled with log t uniform and f uniform on the sphere, so the
    singular weight becomes t^{−αq}‖f‖^{−c−αq}J(f).  Pairs with h outside S
    contribute 2|u(z)|^q; offsets beyond t_max (all outside S) are added
    analytically.
    """
    if q < 1:
        raise ParameterError("q must be ≥ 1")
    if not (0 < alpha < A.alpha_max):
        raise ParameterError(f"alpha must lie in (0, 2/b_max = {A.alpha_max:g})")
    if isinstance(u, PeriodicSample):
        box = u.L if box is None else box
        u = u.as_field()
    if box is None:
        if u.support_radius is None:
            raise ParameterError("box is required for fields without a support radius")
        box = float(u.support_radius)
    n, p = A.n, A.exponents
    pmin = float(np.min(p))
    vol = (2 * box) ** n
    t_min = 1e-6
    t_max = max(1.0, (4.0 * box * math.sqrt(n)) ** (1.0 / pmin))
    lspan = math.log(t_max / t_min)
    area = 2.0 if n == 1 else 2 * math.pi if n == 2 else 4 * math.pi
    kexp = -A.c - alpha * q
    fa, wfa = angular_rule(n, 8, 12)
    far_mass = float(np.sum(wfa * quasi_norm(fa, A) ** kexp * cone_density(fa, A))) * t_max ** (-alpha * q) / (alpha * q)

    def chunk(rng, m):
        z = rng.uniform(-box, box, (m, n))
        f = rng.standard_normal((m, n))
        f /= np.linalg.norm(f, axis=1, keepdims=True)
        # one sample per log-t stratum, strata shuffled against z and f
        t = t_min * np.exp(lspan * (rng.permutation(m) + rng.random(m)) / m)
        h = z + f * t[:, None] ** p
        uz, uh = u(z), u(h)
        inside = np.all(np.abs(h) <= box, axis=1)
        diff = np.where(inside, np.abs(uz - uh) ** q, 2 * np.abs(uz) ** q)
        wgt = t ** (-alpha * q) * quasi_norm(f, A) ** kexp * cone_density(f, A)
        est = diff * wgt * vol * area * lspan
        lq = vol * np.abs(uz) ** q
        return est, 2 * lq * far_mass, lq

    parts = _run_chunks(chunk, seed, int(budget), threads)
    est = np.concatenate([a for a, _, _ in parts])
    tail = np.concatenate([b for _, b, _ in parts])
    lq = np.concatenate([c for _, _, c in parts])

    def total(k):
        dbl = float(np.mean(est[:k]) + np.mean(tail[:k]))
        return float(np.mean(lq[:k])) ** (1.0 / q) + max(dbl, 0.0) ** (1.0 / q), dbl

    full, dbl = total(est.size)
    half, _ = total(max(1, est.size // 2))
    sat = abs(full - half) / full if full > 0 else 0.0
    stderr = float(np.std(est) / math.sqrt(est.size))
    return SeminormReport(full, {"budget": int(budget), "seed": seed, "q": q, "alpha": alpha, "box": box,
                                 "double_integral": dbl, "lq_norm": float(np.mean(lq)) ** (1.0 / q),
                                 "stderr": stderr}, sat, flagged=bool(sat > 0.1))


# ---------------------------------------------------------------------------
# Bessel norm and the embedding ratio


def _require_c_equals_n(A: Anisotropy):
    if abs(A.c - A.n) >= 1e-9:
        raise ParameterError(f"Bessel norms require c = n (c = {A.c:g}, n = {A.n})")


def _multiplier(s: PeriodicSample, A: Anisotropy, alpha: float):
    k = np.fft.fftfreq(s.N, d=1.0 / s.N)
    xi = np.stack(np.meshgrid(*([np.pi * k / s.L] * s.n), indexing="ij"), axis=-1)
    r = np.asarray(cbl_distance(xi.reshape(-1, s.n), A)).reshape((s.N,) * s.n)
    return (1.0 + r ** 2) ** (alpha / 2.0)


def bessel_norm(s: PeriodicSample, A: Anisotropy, alpha: float, q: float, plancherel: bool = False):
    """‖F^{−1}[(1 + r_β(ξ)²)^{α/2} F u]‖_q on the periodic grid, mode k ↦ ξ = πk/L.

    With ``plancherel=True`` (q = 2 only) returns (value, direct) where
    direct = (h^n/N^n Σ (1 + r_β²)^α |û|²)^{1/2}.
    """
    _require_c_equals_n(A)
    if s.n != A.n:
        raise ParameterError("sample dimension does not match the anisotropy")
    if q < 2:
        raise ParameterError("q must be ≥ 2")
    if alpha < 0:
        raise ParameterError("alpha must be ≥ 0")
    cell = s.h ** s.n
    if alpha == 0:
        v = s.values
        m = None
    else:
        m = _multiplier(s, A, alpha)
        v = np.fft.ifftn(m * np.fft.fftn(s.values)).real
    value = float((cell * np.sum(np.abs(v) ** q)) ** (1.0 / q))
    if not plancherel:
        return value
    if q != 2:
        raise ParameterError("the Plancherel cross-check is defined for q = 2")
    U = np.fft.fftn(s.values)
    m2 = 1.0 if m is None else m ** 2
    direct = float(math.sqrt(cell * float(np.sum(m2 * np.abs(U) ** 2)) / s.values.size))
    return value, direct


def embedding_ratio(s: PeriodicSample, A: Anisotropy, alpha: float, q: float, pairs: int = 20_000,
                    seed=0, strict: bool = True, threads: int = 1) -> float:
    """(‖u‖_∞ + [u]_θ) / ‖u‖_{H^{α,q}} with θ = α − c/q.

    ``strict=False`` admits α ≥ 2/b_max (the Bessel and Hölder sides are
    still defined there); the other preconditions always apply.
    """
    _require_c_equals_n(A)
    if q < 2:
        raise ParameterError("q must be ≥ 2")
    if not (alpha * q > A.c):
        raise ParameterError(f"need alpha·q > c: {alpha}·{q} = {alpha * q:g} ≤ {A.c:g}")
    if not (alpha > 0) or (strict and not alpha < A.alpha_max):
        raise ParameterError(f"alpha must lie in (0, 2/b_max = {A.alpha_max:g})")
    theta = alpha - A.c / q
    if theta > 1:
        raise ParameterError("theta = alpha − c/q must be ≤ 1")
    fld = s.as_field()
    sup = float(np.max(np.abs(s.values)))
    hol = holder_seminorm(fld, A, theta, pairs=pairs, seed=seed, box=s.L, threads=threads).value
    return (sup + hol) / bessel_norm(s, A, alpha, q)


def embedding_family(A: Anisotropy, L: float, N: int) -> list[PeriodicSample]:
    """Frozen family of ten dilated and translated bumps b(T_λ^{−1}(x − x₀)).

    b is the Euclidean C^∞ bump of radius 1; λ ∈ {0.6, 0.75, 0.9, 1.05, 1.2}
    and x₀ ∈ {0, (0.3, −0.4, …)}.
    """
    out = []
    shift = np.resize(np.array([0.3, -0.4]), A.n)
    for x0 in (np.zeros(A.n), shift):
        for lam in (0.6, 0.75, 0.9, 1.05, 1.2):
            def f(x, lam=lam, x0=x0):
                y = scale_map(x - x0, A, 1.0 / lam)
                r2 = np.sum(y * y, axis=-1)
                out_ = np.zeros(r2.shape)
                inside = r2 < 1
                out_[inside] = np.exp(1.0 - 1.0 / (1.0 - r2[inside]))
                return out_
            out.append(PeriodicSample.from_function(f, A.n, L, N))
    return out


# ---------------------------------------------------------------------------
# Decay at infinity


def vanishing_at_infinity_check(u: Field, A: Anisotropy, radii, samples: int = 512):
    """max |u| on ∂Θ_R for increasing R; returns (rows, slope, monotone_to_zero).

    ``slope`` is the log-log slope of the maxima against R (nan when some
    maximum vanishes); ``monotone_to_zero`` requires nonincreasing maxima
    and a final value below 0.05 × the first.
    """
    radii = [float(r) for r in radii]
    if len(radii) < 2 or any(b <= a for a, b in zip(radii, radii[1:])):
        raise ParameterError("radii must be strictly increasing")
    if A.n == 1:
        e = np.array([[1.0], [-1.0]])
    else:
        e, _ = angular_rule(A.n, 8, max(4, samples // (4 * 8) if A.n == 2 else 8))
    sph = e * (1.0 / np.asarray(quasi_norm(e, A))[:, None]) ** A.exponents
    rows = [(R, float(np.max(np.abs(u(scale_map(sph, A, R)))))) for R in radii]
    m = np.array([v for _, v in rows])
    slope = float(np.polyfit(np.log(radii), np.log(m), 1)[0]) if np.all(m > 0) else math.nan
    mono = bool(np.all(np.diff(m) <= 1e-15 * max(m[0], 1e-300)) and m[-1] < 0.05 * m[0])
    return rows, slope, mono

"""Shared one-dimensional and angular quadrature rules.

Angular rules live on the Euclidean unit sphere and always have panel edges
on the coordinate hyperplanes, because every kernel in this package contains
|y_i|^{b_i} factors that are only finitely smooth there.
"""

from __future__ import annotations

from functools import lru_cache

import numpy as np
from scipy.special import roots_jacobi, roots_legendre

__all__ = [
    "gauss_legendre",
    "gauss_jacobi_left",
    "sigmoid_map",
    "angular_rule",
    "smooth_cutoff",
]


@lru_cache(maxsize=64)
def _legendre(m: int):
    x, w = roots_legendre(m)
    return x, w


def gauss_legendre(a, b, m: int):
    """Gauss–Legendre nodes/weights on [a, b]; a and b may be arrays (broadcast on a new last axis)."""
    x, w = _legendre(m)
    a = np.asarray(a, dtype=float)[..., None]
    b = np.asarray(b, dtype=float)[..., None]
    half = 0.5 * (b - a)
    return a + half * (x + 1.0), half * w


@lru_cache(maxsize=256)
def _jacobi_unit(m: int, a_key: float):
    x, w = roots_jacobi(m, 0.0, a_key)
    # map (1+x)^a on [-1,1] to σ^a on [0,1]
    return 0.5 * (x + 1.0), w / 2.0 ** (a_key + 1.0)


def gauss_jacobi_left(length, a: float, m: int):
    """Nodes/weights for ∫_0^L σ^a f(σ) dσ, with the weight σ^a absorbed."""
    x, w = _jacobi_unit(m, float(a))
    L = np.asarray(length, dtype=float)[..., None]
    return L * x, w * L ** (a + 1.0)


def sigmoid_map(tau):
    """Endpoint-clustering map of [0,1] onto itself and its derivative.

    φ(τ) = τ³ / (τ³ + (1−τ)³) has φ' vanishing to second order at both ends,
    which smooths algebraic endpoint behaviour of the integrand.
    """
    tau = np.asarray(tau, dtype=float)
    a = tau ** 3
    b = (1.0 - tau) ** 3
    s = a + b
    phi = a / s
    dphi = 3.0 * (tau ** 2 * b + (1.0 - tau) ** 2 * a) / s ** 2
    return phi, dphi


@lru_cache(maxsize=64)
def _angular_rule_cached(n: int, panels: int, order: int, half: bool):
    xg, wg = _legendre(order)
    # composite rule on [0,1] in the sigmoid variable
    edges = np.linspace(0.0, 1.0, panels + 1)
    tau = (edges[:-1, None] + 0.5 * (edges[1:, None] - edges[:-1, None]) * (xg + 1.0)).ravel()
    wt = (0.5 * (edges[1:, None] - edges[:-1, None]) * wg).ravel()
    phi, dphi = sigmoid_map(tau)
    u01, w01 = phi, wt * dphi
    if n == 1:
        pts = np.array([[1.0], [-1.0]])
        w = np.ones(2)
        if half:
            return pts[:1], w[:1]
        return pts, w
    if n == 2:
        th_q = 0.5 * np.pi * u01
        w_q = 0.5 * np.pi * w01
        quads = range(2) if half else range(4)
        th = np.concatenate([th_q + 0.5 * np.pi * k for k in quads])
        w = np.concatenate([w_q for _ in quads])
        return np.stack([np.cos(th), np.sin(th)], axis=1), w
    if n == 3:
        # octant: polar angle ϑ ∈ [0, π/2], azimuth φ ∈ [0, π/2]
        V, P = np.meshgrid(0.5 * np.pi * u01, 0.5 * np.pi * u01, indexing="ij")
        WV, WP = np.meshgrid(0.5 * np.pi * w01, 0.5 * np.pi * w01, indexing="ij")
        V, P, W = V.ravel(), P.ravel(), (WV * WP).ravel() * np.sin(V.ravel())
        base = np.stack([np.sin(V) * np.cos(P), np.sin(V) * np.sin(P), np.cos(V)], axis=1)
        pts, ws = [], []
        for sx in (1, -1):
            for sy in (1, -1):
                for sz in ((1,) if half else (1, -1)):
                    pts.append(base * np.array([sx, sy, sz]))
                    ws.append(W)
        return np.concatenate(pts), np.concatenate(ws)
    raise ValueError(f"angular rules are implemented for n ≤ 3, got n = {n}")


def angular_rule(n: int, panels: int = 4, order: int = 8, half: bool = False):
    """Quadrature for the Euclidean unit sphere S^{n−1}.

    Each orthant is integrated separately with a sigmoid-mapped composite
    Gauss rule.  With ``half=True`` only the part with last coordinate ≥ 0 is
    returned (useful for even integrands).
    """
    pts, w = _angular_rule_cached(int(n), int(panels), int(order), bool(half))
    return pts.copy(), w.copy()


def smooth_cutoff(t, radius: float):
    """C^∞ step: 1 for t ≤ radius/2, 0 for t ≥ radius."""
    t = np.asarray(t, dtype=float)
    tau = np.clip((t - 0.5 * radius) / (0.5 * radius), 0.0, 1.0)
    with np.errstate(divide="ignore", over="ignore", invalid="ignore"):
        a = np.where(tau < 1.0, np.exp(-1.0 / np.maximum(1.0 - tau, 1e-300)), 0.0)
        b = np.where(tau > 0.0, np.exp(-1.0 / np.maximum(tau, 1e-300)), 0.0)
    return a / (a + b)

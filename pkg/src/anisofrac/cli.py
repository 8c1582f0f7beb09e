"""Command line front end: ``anisofrac SUBCOMMAND --config PATH [--out DIR] ...``.

Every subcommand writes CSV files plus ``diagnostics.txt`` (sorted
``key = value`` lines) into the output directory and prints a one-line
summary.  Library errors map to the exit codes carried by the exception
classes in :mod:`anisofrac.errors`.
"""

from __future__ import annotations

import argparse
import csv
import math
import os
import sys
from concurrent.futures import ThreadPoolExecutor

import numpy as np

from . import barrier as bar
from . import homogeneous as hom
from . import norms
from .config import SUBCOMMANDS, RunConfig, load_config
from .errors import AnisofracError, ParameterError
from .geometry import (build_sphere_grid, ellipsoid_volume, inclusion_constant, quasi_triangle_constant,
                       set_inclusion_check)
from .operator import (Field, bump_field, constant_field, eval_operator, gaussian_field,
                       quasi_power_field)

__all__ = ["main", "run_subcommand", "EXIT_CODES"]

EXIT_CODES = {
    "success": 0,
    "internal or unclassified library error": 1,
    "config": 2,
    "parameter": 3,
    "domain": 4,
    "quadrature": 5,
    "solver": 6,
    "bracket": 7,
}


def _fmt(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return str(int(v))
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    if v is None:
        return ""
    return str(v)


def _write_csv(path, header, rows, comment: str | None = None) -> None:
    with open(path, "w", newline="") as fh:
        if comment:
            fh.write(f"# {comment}\n")
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for r in rows:
            w.writerow([_fmt(v) for v in r])


def _write_diagnostics(path, info: dict) -> None:
    with open(path, "w") as fh:
        for k in sorted(info):
            fh.write(f"{k} = {_fmt(info[k])}\n")


def _xcols(n):
    return [f"x_{i + 1}" for i in range(n)]


def _grid_rows(grid):
    return [[j, *grid.points[j], grid.weights[j]] for j in range(grid.size)]


def _make_field(cfg: RunConfig, s: dict) -> Field:
    A, kind = cfg.anisotropy, s["field"]
    center = s.get("center") or [0.0] * A.n
    if kind == "constant":
        return constant_field(s.get("value", 1.0), A.n)
    if kind == "bump":
        return bump_field(center, s["radius"])
    if kind == "gaussian":
        return gaussian_field(center, s["width"])
    if kind == "quasi-power":
        return quasi_power_field(A, s["gamma"], s["multiplier"])
    return bar.barrier(A, s["gamma"]).field


def _pmap(fn, items, threads):
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            return list(pool.map(fn, items))
    return [fn(i) for i in items]


# ---------------------------------------------------------------------------
# Subcommands; each returns (summary line, diagnostics dict)


def _cmd_eval(cfg: RunConfig, out: str):
    A, s = cfg.anisotropy, cfg.section("eval")
    u = _make_field(cfg, s)
    pts = [np.array(p, dtype=float) for p in s["points"]]
    res = _pmap(lambda x: eval_operator(u, x, A, cfg.alpha, cfg.quadrature), pts, cfg.threads)
    _write_csv(os.path.join(out, "eval.csv"), [*_xcols(A.n), "value", "error_estimate", "near", "far", "tail"],
               [r.row(x) for x, r in zip(pts, res)])
    info = {"points": len(pts), "field": s["field"], "alpha": cfg.alpha,
            "max_error_estimate": max(r.error_estimate for r in res),
            "flagged": sum(bool(r.flagged) for r in res)}
    r0 = res[0]
    return f"value = {r0.value:.12g} ± {r0.error_estimate:.3g} (first of {len(pts)} points)", info


def _cmd_sweep(cfg: RunConfig, out: str):
    A, s = cfg.anisotropy, cfg.section("barrier-sweep")
    grid = build_sphere_grid(A, cfg.resolution)
    alphas = s["alphas"] or bar.default_alpha_grid(A, s["alpha_points"])
    gammas = s["gammas"] or bar.default_gamma_grid(A)
    res = bar.barrier_sweep(A, alphas, gammas, grid, cfg.quadrature, threads=cfg.threads)
    _write_csv(os.path.join(out, "sweep.csv"), ["alpha", "gamma", "min_value", "argmin_node", "error_flag"],
               res.table())
    _write_csv(os.path.join(out, "grid.csv"), ["node_index", *_xcols(A.n), "weight"], _grid_rows(grid))
    info = {"cells": len(res.rows), "flagged_cells": sum(r.error_flag for r in res.rows)}
    for g in gammas:
        info[f"alpha0[gamma={float(g)!r}]"] = "none" if res.alpha0[g] is None else res.alpha0[g]
        info[f"trend[gamma={float(g)!r}]"] = res.trend[g]
    worst = min(res.rows, key=lambda r: r.min_value if not math.isnan(r.min_value) else math.inf)
    return (f"min Δu_γ = {worst.min_value:.6g} at alpha = {worst.alpha:.6g}, gamma = {worst.gamma:.6g} "
            f"({info['flagged_cells']} flagged cells)"), info


def _cmd_gamma_star(cfg: RunConfig, out: str):
    A, s = cfg.anisotropy, cfg.section("gamma-star")
    grid = build_sphere_grid(A, cfg.resolution)
    bracket = tuple(s["bracket"]) if s["bracket"] else None
    res = hom.gamma_star(A, cfg.alpha, grid, cfg.quadrature, bracket=bracket, tol=s["tol"],
                         threads=cfg.threads, eigen_check=s["eigen_check"])
    _write_csv(os.path.join(out, "bisection.csv"), ["step", "gamma", "indicator", "min_value", "max_abs"],
               [[i, *h] for i, h in enumerate(res.history)])
    info = res.diagnostics()
    width = res.bracket_hi - res.bracket_lo
    return f"gamma_star = {res.gamma_star:.6f} ± {width / 2:.2g}", info


def _cmd_fundsol(cfg: RunConfig, out: str):
    A, s = cfg.anisotropy, cfg.section("fundsol")
    grid = build_sphere_grid(A, cfg.resolution)
    Psi = hom.fundamental_solution(A, cfg.alpha, grid, cfg.quadrature, tol=s["tol"],
                                   threads=cfg.threads, seed=cfg.seed)
    _write_csv(os.path.join(out, "profile.csv"), ["node_index", *_xcols(A.n), "psi_value"], Psi.rows())
    info = dict(Psi.info)
    lo, hi = hom.beta_sphere_extrema(Psi)
    info["beta_sphere_sup"] = hi
    info["beta_sphere_inf"] = lo
    for k, v in hom.two_sided_bounds(Psi, s["bound_samples"], seed=cfg.seed).items():
        info[f"bounds_{k}"] = v
    return (f"gamma_star = {info['gamma_star']:.6f}, harnack_ratio = {info['harnack_ratio']:.4g}, "
            f"sup = {hi:.9f} (eigen residual {info['eigen_residual']:.2g})"), info


def _norms_sample(cfg: RunConfig, s: dict) -> norms.PeriodicSample:
    if s["sample"]:
        smp = norms.read_periodic_sample(s["sample"])
        if smp.n != cfg.anisotropy.n:
            raise ParameterError(f"sample dimension {smp.n} differs from n = {cfg.anisotropy.n}")
        return smp
    u = _make_field(cfg, s)
    return norms.PeriodicSample.from_function(u, cfg.anisotropy.n, s["L"], s["N"])


def _cmd_norms(cfg: RunConfig, out: str):
    A, s = cfg.anisotropy, cfg.section("norms")
    smp = _norms_sample(cfg, s)
    u = smp.as_field() if s["sample"] else _make_field(cfg, s)
    q, alpha, measure = s["q"], cfg.alpha, s["measure"]
    theta = s["theta"] if s["theta"] is not None else min(1.0, alpha)
    want = lambda m: measure in (m, "all")  # noqa: E731
    rows, info = [], {"q": q, "alpha": alpha, "N": smp.N, "L": smp.L}
    if want("campanato"):
        radii = s["radii"] or (1.0, 0.5, 0.25, 0.125)
        r = norms.campanato_seminorm(u, A, q, alpha, centers=s["centers"], radii=radii, seed=cfg.seed, box=s["box"])
        rows.append(["campanato", r.value, r.saturation, int(r.flagged)])
    if want("holder"):
        r = norms.holder_seminorm(u, A, theta, pairs=s["pairs"], seed=cfg.seed, box=s["box"], threads=cfg.threads)
        rows.append(["holder", r.value, r.saturation, int(r.flagged)])
        info["theta"] = theta
    if want("gagliardo"):
        r = norms.gagliardo_seminorm(smp, A, q, alpha, budget=s["budget"], seed=cfg.seed, threads=cfg.threads)
        rows.append(["gagliardo", r.value, r.saturation, int(r.flagged)])
        info["gagliardo_stderr"] = r.params["stderr"]
    if want("bessel"):
        if q == 2:
            v, direct = norms.bessel_norm(smp, A, alpha, q, plancherel=True)
            info["plancherel_direct"] = direct
            info["plancherel_rel_diff"] = abs(v - direct) / max(abs(direct), 1e-300)
        else:
            v = norms.bessel_norm(smp, A, alpha, q)
        rows.append(["bessel", v, 0.0, 0])
    if measure == "decay":
        radii = s["radii"] or (1.0, 0.5, 0.25, 0.125, 0.0625)
        rep = norms.decay_oscillation_check(u, A, q, alpha, s["center"] or [0.0] * A.n, radii, seed=cfg.seed)
        _write_csv(os.path.join(out, "decay.csv"), ["R", "r", "oscillation", "ratio"], rep.rows)
        rows.append(["decay_slope", rep.slope, 0.0, 0])
        info["theta"] = rep.theta
    _write_csv(os.path.join(out, "norms.csv"), ["measure", "value", "saturation", "flagged"], rows,
               comment="frequency convention: mode k -> xi = pi*k/L")
    return "; ".join(f"{r[0]} = {r[1]:.6g}" for r in rows), info


def _cmd_embed(cfg: RunConfig, out: str):
    A, s = cfg.anisotropy, cfg.section("embed-check")
    fam = norms.embedding_family(A, s["L"], s["N"])
    q, alpha = s["q"], cfg.alpha
    theta = alpha - A.c / q
    rows = []
    for k, smp in enumerate(fam):
        sup = float(np.max(np.abs(smp.values)))
        hol = norms.holder_seminorm(smp.as_field(), A, theta, pairs=s["pairs"], seed=cfg.seed, box=smp.L,
                                    threads=cfg.threads).value
        bes = norms.bessel_norm(smp, A, alpha, q)
        rows.append([k, sup, hol, bes, (sup + hol) / bes])
    _write_csv(os.path.join(out, "embed.csv"), ["function_index", "sup_norm", "holder_seminorm", "bessel_norm", "ratio"],
               rows, comment="frequency convention: mode k -> xi = pi*k/L")
    ratios = [r[-1] for r in rows]
    info = {"theta": theta, "max_ratio": max(ratios), "min_ratio": min(ratios),
            "spread": max(ratios) / min(ratios), "strict": s["strict"]}
    return f"embedding ratio in [{min(ratios):.4g}, {max(ratios):.4g}], spread {info['spread']:.3g}", info


def _cmd_geometry(cfg: RunConfig, out: str):
    A, s = cfg.anisotropy, cfg.section("geometry")
    est, bound = quasi_triangle_constant(A, s["samples"], seed=cfg.seed)
    inc = set_inclusion_check(A, s["radius"], s["samples"], seed=cfg.seed)
    r = s["radius"]
    vol_ratio = ellipsoid_volume(2 * r, A) / ellipsoid_volume(r, A)
    rows = [["c", A.c], ["mu", A.mu], ["alpha_max", A.alpha_max],
            ["quasi_triangle_estimate", est], ["quasi_triangle_bound", bound],
            ["inclusion_constant", inclusion_constant(A)],
            ["inner_violations", inc["inner_violations"]], ["outer_violations", inc["outer_violations"]],
            ["volume_ratio", vol_ratio], ["volume_ratio_error", abs(vol_ratio - 2.0 ** A.c)]]
    if A.n in (2, 3):
        grid = build_sphere_grid(A, cfg.resolution)
        _write_csv(os.path.join(out, "grid.csv"), ["node_index", *_xcols(A.n), "weight"], _grid_rows(grid))
        rows.append(["grid_nodes", grid.size])
        rows.append(["grid_measure", float(np.sum(grid.weights))])
    _write_csv(os.path.join(out, "geometry.csv"), ["quantity", "value"], rows)
    info = {k: v for k, v in rows}
    violations = inc["inner_violations"] + inc["outer_violations"]
    return f"quasi-triangle {est:.6g} ≤ {bound:.6g}; inclusion violations = {violations}", info


COMMANDS = {
    "eval": _cmd_eval,
    "barrier-sweep": _cmd_sweep,
    "gamma-star": _cmd_gamma_star,
    "fundsol": _cmd_fundsol,
    "norms": _cmd_norms,
    "embed-check": _cmd_embed,
    "geometry": _cmd_geometry,
}


def run_subcommand(name: str, cfg: RunConfig, out: str | None = None) -> str:
    """Run one subcommand, write its artifacts and return the summary line."""
    out = out or cfg.out
    os.makedirs(out, exist_ok=True)
    summary, info = COMMANDS[name](cfg, out)
    info = {"subcommand": name, "seed": cfg.seed, **info}
    _write_diagnostics(os.path.join(out, "diagnostics.txt"), info)
    return summary


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="anisofrac", description="Anisotropic fractional Laplacian experiments.")
    p.add_argument("subcommand", choices=SUBCOMMANDS)
    p.add_argument("--config", required=True, metavar="PATH")
    p.add_argument("--out", metavar="DIR", help="output directory (overrides [run] out)")
    p.add_argument("--seed", type=int, metavar="U64")
    p.add_argument("--threads", type=int, metavar="N")
    p.add_argument("--resolution", type=int, metavar="N")
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = load_config(args.config, args.subcommand,
                          {"out": args.out, "seed": args.seed, "threads": args.threads,
                           "resolution": args.resolution})
        summary = run_subcommand(args.subcommand, cfg)
    except AnisofracError as exc:
        kind = type(exc).__name__
        lines = getattr(exc, "problems", None) or [str(exc)]
        for line in lines:
            print(f"anisofrac: {kind}: {line}", file=sys.stderr)
        return exc.exit_code
    print(summary)
    return 0


if __name__ == "__main__":
    sys.exit(main())

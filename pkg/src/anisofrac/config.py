"""Plain-text run configuration: ``[section]`` headers and ``key = value`` lines.

Lists are comma separated; point lists separate points with ``;``.
Comments start with ``#``.  Parsing collects every violation (syntax,
duplicate or unknown keys, failed preconditions) before raising a single
:class:`ConfigError`.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass, field
from fractions import Fraction

from .errors import ConfigError, ParameterError
from .geometry import Anisotropy, make_anisotropy
from .operator import TAIL_MODES, QuadratureConfig

__all__ = ["RunConfig", "SUBCOMMANDS", "parse_config", "load_config"]

SUBCOMMANDS = ("eval", "barrier-sweep", "gamma-star", "fundsol", "norms", "embed-check", "geometry")
FIELDS = ("constant", "bump", "gaussian", "quasi-power", "barrier")
MEASURES = ("campanato", "holder", "gagliardo", "bessel", "decay", "all")

# key -> (kind, default); kind is one of float, int, str, bool, floats, point, points
SCHEMA: dict[str, dict[str, tuple]] = {
    "run": {
        "beta": ("floats", None), "mu": ("int", None), "alpha": ("float", None),
        "resolution": ("int", 128), "seed": ("int", 0), "threads": ("int", 1), "out": ("str", "out"),
    },
    "quadrature": {
        "near_radius": ("float", 0.5), "far_cutoff": ("float", 2.0 ** 20), "rel_tol": ("float", 1e-8),
        "max_subdivisions": ("int", 40), "tail_mode": ("str", "analytic-homogeneous"),
        "angular_panels": ("int", 8), "gauss_order": ("int", 12),
    },
    "eval": {
        "field": ("str", "constant"), "points": ("points", None), "gamma": ("float", None),
        "value": ("float", 1.0), "center": ("point", None), "radius": ("float", 1.0),
        "width": ("float", 1.0), "multiplier": ("float", 1.0),
    },
    "barrier-sweep": {
        "alphas": ("floats", None), "alpha_points": ("int", 12), "gammas": ("floats", None),
    },
    "gamma-star": {"bracket": ("floats", None), "tol": ("float", 1e-3), "eigen_check": ("bool", True)},
    "fundsol": {"tol": ("float", 1e-3), "bound_samples": ("int", 1000)},
    "norms": {
        "measure": ("str", "all"), "sample": ("str", None), "field": ("str", "bump"),
        "center": ("point", None), "radius": ("float", 1.0), "width": ("float", 1.0),
        "L": ("float", 4.0), "N": ("int", 64), "q": ("float", 2.0), "theta": ("float", None),
        "centers": ("int", 64), "pairs": ("int", 20_000), "budget": ("int", 200_000),
        "radii": ("floats", None), "box": ("float", 1.0),
    },
    "embed-check": {
        "q": ("float", 4.0), "L": ("float", 2.0), "N": ("int", 64), "pairs": ("int", 20_000),
        "strict": ("bool", True),
    },
    "geometry": {"samples": ("int", 10_000), "radius": ("float", 1.0)},
}

_LINE = re.compile(r"^([A-Za-z_][A-Za-z0-9_\-]*)\s*=\s*(.*)$")
_SECTION = re.compile(r"^\[([A-Za-z0-9_\-]+)\]$")


@dataclass
class RunConfig:
    anisotropy: Anisotropy
    alpha: float | None
    resolution: int
    seed: int
    threads: int
    out: str
    quadrature: QuadratureConfig
    sections: dict = field(default_factory=dict)

    def section(self, name: str) -> dict:
        """Values of a subcommand section with defaults filled in."""
        vals = {k: d for k, (_, d) in SCHEMA[name].items()}
        vals.update(self.sections.get(name, {}))
        return vals


def _number(raw: str) -> float:
    """A float literal or a fraction such as ``4/3``."""
    raw = raw.strip()
    return float(Fraction(raw)) if "/" in raw else float(raw)


def _convert(kind: str, raw: str):
    if kind == "float":
        v = _number(raw)
        if not math.isfinite(v):
            raise ValueError("must be finite")
        return v
    if kind == "int":
        return int(raw, 0)
    if kind == "str":
        return raw.strip().strip('"')
    if kind == "bool":
        low = raw.strip().lower()
        if low in ("true", "yes", "1"):
            return True
        if low in ("false", "no", "0"):
            return False
        raise ValueError("expected true or false")
    if kind in ("floats", "point"):
        vals = [_number(t) for t in raw.replace("(", "").replace(")", "").split(",") if t.strip()]
        if not vals or not all(math.isfinite(v) for v in vals):
            raise ValueError("expected a comma separated list of finite numbers")
        return vals
    if kind == "points":
        return [_convert("point", p) for p in raw.split(";") if p.strip()]
    raise AssertionError(kind)


def _tokenize(text: str, problems: list[str]) -> dict:
    data: dict[str, dict[str, tuple]] = {}
    section = None
    for lineno, line in enumerate(text.splitlines(), start=1):
        s = line.split("#", 1)[0].strip()
        if not s:
            continue
        m = _SECTION.match(s)
        if m:
            section = m.group(1)
            if section not in SCHEMA:
                problems.append(f"line {lineno}: unknown section [{section}]")
            data.setdefault(section, {})
            continue
        m = _LINE.match(s)
        if not m:
            problems.append(f"line {lineno}: syntax error, expected 'key = value' or '[section]'")
            continue
        if section is None:
            problems.append(f"line {lineno}: key '{m.group(1)}' appears before any [section]")
            continue
        key, raw = m.group(1), m.group(2).strip()
        if key in data[section]:
            first = data[section][key][1]
            problems.append(f"line {lineno}: duplicate key '{key}' in [{section}] (lines {first} and {lineno})")
            continue
        data[section][key] = (raw, lineno)
    return data


def _typed(data: dict, problems: list[str]) -> dict:
    out: dict[str, dict] = {}
    for section, items in data.items():
        if section not in SCHEMA:
            continue
        out[section] = {}
        for key, (raw, lineno) in items.items():
            if key not in SCHEMA[section]:
                problems.append(f"line {lineno}: unknown key '{key}' in [{section}]")
                continue
            kind = SCHEMA[section][key][0]
            try:
                out[section][key] = _convert(kind, raw)
            except ValueError as exc:
                problems.append(f"line {lineno}: bad value for '{key}' ({kind}): {exc}")
    return out


def _check_alpha(A: Anisotropy, alpha, problems, strict=True):
    if alpha is None:
        problems.append("[run] alpha is required")
    elif not (alpha > 0):
        problems.append(f"alpha = {alpha:g} must be > 0")
    elif strict and not (alpha < A.alpha_max):
        problems.append(f"alpha = {alpha:g} violates alpha < 2/b_max = {A.alpha_max:g}")


def _validate(cfg: RunConfig, sub: str | None, problems: list[str]) -> None:
    A = cfg.anisotropy
    if sub is None:
        return
    s = cfg.section(sub)
    if sub in ("gamma-star", "fundsol", "barrier-sweep") and cfg.resolution < 8:
        problems.append(f"resolution = {cfg.resolution} must be ≥ 8")
    if sub == "eval":
        _check_alpha(A, cfg.alpha, problems)
        if s["field"] not in FIELDS:
            problems.append(f"[eval] field must be one of {FIELDS}")
        if not s["points"]:
            problems.append("[eval] points is required")
        else:
            for p in s["points"]:
                if len(p) != A.n:
                    problems.append(f"[eval] point {p} has dimension {len(p)}, expected n = {A.n}")
                elif s["field"] in ("quasi-power", "barrier") and not any(p):
                    problems.append("[eval] homogeneous fields are singular at x = 0")
        if s["field"] in ("quasi-power", "barrier"):
            g = s["gamma"]
            if g is None or not (0 < g < A.c):
                problems.append(f"[eval] gamma must lie in (0, c = {A.c:g})")
        if s["center"] is not None and len(s["center"]) != A.n:
            problems.append(f"[eval] center must have dimension {A.n}")
        if s["radius"] <= 0 or s["width"] <= 0 or s["multiplier"] <= 0:
            problems.append("[eval] radius, width and multiplier must be > 0")
    elif sub == "barrier-sweep":
        if s["alphas"] is None:
            if s["alpha_points"] < 1:
                problems.append("[barrier-sweep] alpha_points must be ≥ 1")
        else:
            for a in s["alphas"]:
                _check_alpha(A, a, problems)
        for g in s["gammas"] or []:
            if not (0 < g < A.c):
                problems.append(f"[barrier-sweep] gamma = {g:g} outside (0, c = {A.c:g})")
    elif sub in ("gamma-star", "fundsol"):
        _check_alpha(A, cfg.alpha, problems)
        if A.n != 2:
            problems.append(f"{sub} is implemented for n = 2, got n = {A.n}")
        if s["tol"] <= 0:
            problems.append(f"[{sub}] tol must be > 0")
        if sub == "gamma-star" and s["bracket"] is not None:
            b = s["bracket"]
            if len(b) != 2 or not (0 < b[0] < b[1] < A.c):
                problems.append(f"[gamma-star] bracket must satisfy 0 < lo < hi < c = {A.c:g}")
        if sub == "fundsol" and s["bound_samples"] < 1:
            problems.append("[fundsol] bound_samples must be ≥ 1")
    elif sub == "norms":
        _check_alpha(A, cfg.alpha, problems)
        if s["measure"] not in MEASURES:
            problems.append(f"[norms] measure must be one of {MEASURES}")
        if s["field"] not in ("bump", "gaussian", "constant"):
            problems.append("[norms] field must be bump, gaussian or constant")
        if s["q"] < 1:
            problems.append("[norms] q must be ≥ 1")
        if s["measure"] in ("bessel", "all") and abs(A.c - A.n) >= 1e-9:
            problems.append(f"[norms] Bessel norms require c = n (c = {A.c:g}, n = {A.n})")
        if s["measure"] in ("bessel", "all") and s["q"] < 2:
            problems.append("[norms] Bessel norms require q ≥ 2")
        if s["N"] < 2 or s["N"] & (s["N"] - 1):
            problems.append(f"[norms] N = {s['N']} must be a power of two")
        if s["L"] <= 0 or s["radius"] <= 0 or s["width"] <= 0 or s["box"] <= 0:
            problems.append("[norms] L, radius, width and box must be > 0")
        if s["center"] is not None and len(s["center"]) != A.n:
            problems.append(f"[norms] center must have dimension {A.n}")
        theta = s["theta"]
        if theta is not None and not (0 < theta <= 1):
            problems.append("[norms] theta must lie in (0, 1]")
        if s["measure"] == "decay" and cfg.alpha is not None:
            if not (cfg.alpha - A.c / s["q"] > 0):
                problems.append(f"[norms] decay check needs alpha − c/q > 0 (got {cfg.alpha - A.c / s['q']:g})")
        if s["radii"] is not None and min(s["radii"]) <= 0:
            problems.append("[norms] radii must be > 0")
        for k in ("centers", "pairs", "budget"):
            if s[k] < 1:
                problems.append(f"[norms] {k} must be ≥ 1")
    elif sub == "embed-check":
        _check_alpha(A, cfg.alpha, problems, strict=s["strict"])
        q = s["q"]
        if abs(A.c - A.n) >= 1e-9:
            problems.append(f"[embed-check] requires c = n (c = {A.c:g}, n = {A.n})")
        if q < 2:
            problems.append("[embed-check] q must be ≥ 2")
        if cfg.alpha is not None and not (cfg.alpha * q > A.c):
            problems.append(f"[embed-check] needs alpha·q > c ({cfg.alpha:g}·{q:g} ≤ {A.c:g})")
        if cfg.alpha is not None and cfg.alpha - A.c / q > 1:
            problems.append("[embed-check] theta = alpha − c/q must be ≤ 1")
        if s["N"] < 8 or s["N"] & (s["N"] - 1):
            problems.append(f"[embed-check] N = {s['N']} must be a power of two ≥ 8")
        if s["L"] <= 0 or s["pairs"] < 1:
            problems.append("[embed-check] L and pairs must be positive")
    elif sub == "geometry":
        if s["samples"] < 1000:
            problems.append("[geometry] samples must be ≥ 1000")
        if s["radius"] <= 0:
            problems.append("[geometry] radius must be > 0")
        if A.n in (2, 3) and cfg.resolution < 8:
            problems.append(f"resolution = {cfg.resolution} must be ≥ 8")


def parse_config(text: str, subcommand: str | None = None, overrides: dict | None = None) -> RunConfig:
    """Parse and validate; ``overrides`` replaces [run] values (e.g. from CLI flags)."""
    if subcommand is not None and subcommand not in SUBCOMMANDS:
        raise ConfigError(f"unknown subcommand '{subcommand}'")
    problems: list[str] = []
    tokens = _tokenize(text, problems)
    data = _typed(tokens, problems)
    run = {k: d for k, (_, d) in SCHEMA["run"].items()}
    run.update(data.get("run", {}))
    for k, v in (overrides or {}).items():
        if v is not None:
            run[k] = v
    # for the FFT-based subcommands the resolution flag sets the sample grid size
    if (overrides or {}).get("resolution") is not None and subcommand in ("norms", "embed-check"):
        data.setdefault(subcommand, {})["N"] = int(overrides["resolution"])
    A = None
    if run["beta"] is None:
        if "beta" not in tokens.get("run", {}):
            problems.append("[run] beta is required")
    else:
        try:
            A = make_anisotropy(run["beta"], run["mu"])
        except ParameterError as exc:
            problems.append(f"[run] beta/mu: {exc}")
    if run["threads"] < 1:
        problems.append("[run] threads must be ≥ 1")
    if run["seed"] < 0 or run["seed"] >= 2 ** 64:
        problems.append("[run] seed must be an unsigned 64-bit integer")
    if run["resolution"] < 1:
        problems.append("[run] resolution must be ≥ 1")
    qvals = {k: d for k, (_, d) in SCHEMA["quadrature"].items()}
    qvals.update(data.get("quadrature", {}))
    if qvals["tail_mode"] not in TAIL_MODES:
        problems.append(f"[quadrature] tail_mode must be one of {TAIL_MODES}")
    quad = None
    try:
        quad = QuadratureConfig(**qvals)
    except ParameterError as exc:
        problems.append(f"[quadrature] {exc}")
    if A is None or quad is None:
        raise ConfigError(problems)
    cfg = RunConfig(A, run["alpha"], int(run["resolution"]), int(run["seed"]), int(run["threads"]),
                    str(run["out"]), quad, {k: v for k, v in data.items() if k not in ("run", "quadrature")})
    _validate(cfg, subcommand, problems)
    if problems:
        raise ConfigError(problems)
    return cfg


def load_config(path, subcommand: str | None = None, overrides: dict | None = None) -> RunConfig:
    try:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    return parse_config(text, subcommand, overrides)

import csv
import filecmp
import os

import pytest

from anisofrac.cli import EXIT_CODES, main
from anisofrac.config import parse_config
from anisofrac.errors import ConfigError

# small but complete configurations, one per subcommand
CONFIGS = {
    "eval": """
[run]
beta = 4/3, 4
alpha = 0.45
[eval]
field = gaussian
points = 0.5, 0.2; -0.3, 0.1
""",
    "barrier-sweep": """
[run]
beta = 2, 2
resolution = 16
[barrier-sweep]
alphas = 0.5, 0.9
gammas = 0.1
""",
    "gamma-star": """
[run]
beta = 2, 2
alpha = 0.75
resolution = 16
[gamma-star]
tol = 0.01
eigen_check = false
""",
    "fundsol": """
[run]
beta = 2, 2
alpha = 0.75
resolution = 16
[fundsol]
tol = 0.01
bound_samples = 200
""",
    "norms": """
[run]
beta = 2, 2
alpha = 0.5
[norms]
L = 4
N = 32
budget = 10000
centers = 8
pairs = 5000
""",
    "embed-check": """
[run]
beta = 4/3, 4
alpha = 0.45
[embed-check]
q = 8
N = 16
pairs = 2000
""",
    "geometry": """
[run]
beta = 4/3, 4
resolution = 32
[geometry]
samples = 2000
""",
}

OUTPUTS = {
    "eval": ["eval.csv"],
    "barrier-sweep": ["sweep.csv", "grid.csv"],
    "gamma-star": ["bisection.csv"],
    "fundsol": ["profile.csv"],
    "norms": ["norms.csv"],
    "embed-check": ["embed.csv"],
    "geometry": ["geometry.csv", "grid.csv"],
}


def run(tmp_path, sub, text, *extra):
    cfg = tmp_path / f"{sub}.ini"
    cfg.write_text(text)
    return main([sub, "--config", str(cfg), *extra])


# ---------------------------------------------------------------------------
# Configuration parsing


def test_parse_fractions_lists_and_defaults():
    cfg = parse_config("[run]\nbeta = 4/3, 4\nalpha = 0.3\n[eval]\npoints = 1, 0; 0.5, 0.5\n", "eval")
    assert cfg.anisotropy.beta == pytest.approx((4 / 3, 4))
    assert cfg.section("eval")["points"] == [[1.0, 0.0], [0.5, 0.5]]
    assert cfg.resolution == 128 and cfg.threads == 1 and cfg.seed == 0


def test_overrides_replace_run_values():
    cfg = parse_config("[run]\nbeta = 2, 2\nalpha = 0.5\n", "geometry", {"seed": 7, "resolution": 32, "out": None})
    assert cfg.seed == 7 and cfg.resolution == 32


def test_resolution_override_sets_fft_grid():
    cfg = parse_config(CONFIGS["norms"], "norms", {"resolution": 64})
    assert cfg.section("norms")["N"] == 64


def test_all_violations_reported_together():
    text = "[run]\nbeta = 2, 4\nalpha = 0.9\nbogus = 1\n[eval]\npoints = 1, 0, 0\n[nowhere]\n"
    with pytest.raises(ConfigError) as exc:
        parse_config(text, "eval")
    msgs = exc.value.problems
    assert any("unknown key 'bogus'" in m for m in msgs)
    assert any("unknown section [nowhere]" in m for m in msgs)
    assert any("alpha < 2/b_max = 0.5" in m for m in msgs)
    assert any("dimension 3" in m for m in msgs)


def test_duplicate_key_names_both_lines():
    with pytest.raises(ConfigError) as exc:
        parse_config("[run]\nbeta = 2, 2\nalpha = 0.5\nalpha = 0.4\n", "geometry")
    assert any("duplicate key 'alpha' in [run] (lines 3 and 4)" in m for m in exc.value.problems)


def test_syntax_errors_and_orphan_keys():
    with pytest.raises(ConfigError) as exc:
        parse_config("alpha = 0.5\n[run]\nbeta 2, 2\n")
    msgs = exc.value.problems
    assert any("line 1" in m and "before any [section]" in m for m in msgs)
    assert any("line 3: syntax error" in m for m in msgs)


def test_subcommand_preconditions():
    with pytest.raises(ConfigError, match="n = 2"):
        parse_config("[run]\nbeta = 2, 2, 2\nalpha = 0.5\n", "gamma-star")
    with pytest.raises(ConfigError, match="c = n"):
        parse_config("[run]\nbeta = 1, 4\nalpha = 0.3\n[norms]\nmeasure = bessel\n", "norms")
    with pytest.raises(ConfigError, match="alpha·q > c"):
        parse_config("[run]\nbeta = 2, 2\nalpha = 0.4\n[embed-check]\nq = 4\n", "embed-check")


def test_embed_check_strict_flag_admits_large_alpha():
    text = "[run]\nbeta = 4/3, 4\nalpha = 0.8\n[embed-check]\nq = 4\n"
    with pytest.raises(ConfigError, match="2/b_max"):
        parse_config(text, "embed-check")
    assert parse_config(text + "strict = false\n", "embed-check").alpha == 0.8


# ---------------------------------------------------------------------------
# Exit codes and artifacts


def test_exit_code_table_is_distinct():
    assert EXIT_CODES["success"] == 0 and EXIT_CODES["config"] == 2
    assert len(set(EXIT_CODES.values())) == len(EXIT_CODES)


def test_config_error_exit_code(tmp_path, capsys):
    code = run(tmp_path, "eval", "[run]\nbeta = 2, 4\nalpha = 0.9\n[eval]\npoints = 1, 0\n", "--out", str(tmp_path))
    assert code == EXIT_CODES["config"]
    assert "ConfigError" in capsys.readouterr().err


def test_missing_config_file(tmp_path):
    assert main(["geometry", "--config", str(tmp_path / "absent.ini")]) == EXIT_CODES["config"]


def test_domain_error_exit_code(tmp_path):
    # a sample that does not fit in its box
    sample = tmp_path / "s.txt"
    sample.write_text("2 8 1.0\n" + "1.0\n" * 64)
    text = f"[run]\nbeta = 2, 2\nalpha = 0.5\n[norms]\nsample = {sample}\nmeasure = bessel\n"
    assert run(tmp_path, "norms", text, "--out", str(tmp_path / "o")) == EXIT_CODES["domain"]


def test_eval_of_constant_is_zero(tmp_path):
    text = "[run]\nbeta = 4/3, 4\nalpha = 0.4\n[eval]\nfield = constant\npoints = 1, 0; 0.3, -0.2\n"
    assert run(tmp_path, "eval", text, "--out", str(tmp_path)) == 0
    with open(tmp_path / "eval.csv") as fh:
        rows = list(csv.DictReader(fh))
    assert len(rows) == 2
    assert all(abs(float(r["value"])) < 1e-10 for r in rows)


def test_geometry_reports_no_violations(tmp_path):
    assert run(tmp_path, "geometry", CONFIGS["geometry"], "--out", str(tmp_path)) == 0
    with open(tmp_path / "geometry.csv") as fh:
        vals = {r["quantity"]: float(r["value"]) for r in csv.DictReader(fh)}
    assert vals["inner_violations"] == 0 and vals["outer_violations"] == 0
    assert vals["volume_ratio_error"] < 1e-12
    diag = (tmp_path / "diagnostics.txt").read_text().splitlines()
    assert diag == sorted(diag)


@pytest.mark.parametrize("sub", sorted(CONFIGS))
def test_outputs_identical_across_thread_counts(tmp_path, sub):
    outs = []
    for threads in (1, 4):
        out = tmp_path / f"t{threads}"
        assert run(tmp_path, sub, CONFIGS[sub], "--out", str(out), "--threads", str(threads), "--seed", "3") == 0
        outs.append(out)
    for name in OUTPUTS[sub] + ["diagnostics.txt"]:
        assert os.path.exists(outs[0] / name)
        assert filecmp.cmp(outs[0] / name, outs[1] / name, shallow=False), name

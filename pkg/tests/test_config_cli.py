import csv
import io
import json

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from trapmodes import cli
from trapmodes.config import (ConfigError, ExperimentConfig, dump_config, load_config,
                              parse_config)
from trapmodes.eigensolver import SolverError
from trapmodes.geometry import read_mesh

EXAMPLE = """
[experiment]
kind = spectrum

[geometry]
name = cross
params = 5, 5, 5, 5

[solver]
h = 0.125
modes = 3
extrapolate = false

[output]
format = json
"""


def test_parse_typed_values():
    cfg = parse_config(EXAMPLE)
    assert cfg.kind == "spectrum"
    assert cfg.get("geometry", "params") == (5.0, 5.0, 5.0, 5.0)
    assert cfg.get("solver", "modes") == 3
    assert cfg.get("solver", "extrapolate") is False
    assert cfg.get("solver", "truncation") == 32          # default


def test_round_trip_example():
    cfg = parse_config(EXAMPLE)
    assert parse_config(dump_config(cfg)) == cfg
    assert dump_config(parse_config(dump_config(cfg))) == dump_config(cfg)


finite = st.floats(allow_nan=False, allow_infinity=False, width=64)


@settings(max_examples=60, deadline=None)
@given(h=finite, modes=st.integers(1, 50), flag=st.booleans(),
       params=st.lists(finite, max_size=5), kind=st.sampled_from(cli.KINDS))
def test_round_trip_property(h, modes, flag, params, kind):
    cfg = ExperimentConfig()
    cfg.set("experiment", "kind", kind)
    cfg.set("solver", "h", h)
    cfg.set("solver", "modes", modes)
    cfg.set("solver", "extrapolate", flag)
    cfg.set("geometry", "params", tuple(params))
    assert parse_config(dump_config(cfg)) == cfg


@pytest.mark.parametrize("text", [
    "[experiment]\nkind = spectrum\n[bogus]\nx = 1\n",
    "[solver]\nh = 0.1\nsmoother = 3\n",
    "[experiment]\nkind = plot\n",
    "[solver]\nmodes = many\n",
    "[solver]\nh = nan\n",
    "not a config",
])
def test_invalid_config_rejected(text):
    with pytest.raises(ConfigError):
        parse_config(text)


def test_load_missing_file(tmp_path):
    with pytest.raises(ConfigError):
        load_config(tmp_path / "nope.ini")


def _run(argv, capsys):
    code = cli.main(argv)
    out, err = capsys.readouterr()
    return code, out, err


def test_condition_stdout_csv(capsys):
    code, out, _ = _run(["condition", "--geometry", "l_shape", "--params", "2,2",
                         "--trial", "l_shape"], capsys)
    assert code == 0
    row = next(csv.DictReader(io.StringIO(out)))
    assert row["satisfied"] == "True"
    assert float(row["a_th"]) == pytest.approx(1.0)


def test_spectrum_from_config_file(tmp_path, capsys):
    path = tmp_path / "exp.ini"
    path.write_text(EXAMPLE)
    code, out, _ = _run(["spectrum", "--config", str(path)], capsys)
    assert code == 0
    data = json.loads(out)
    assert len(data["eigenvalues"]) == 3
    for row in data["eigenvalues"]:
        assert {"lambda", "lambda_over_pi2", "residual", "trapped"} <= set(row)


def test_spectrum_csv_columns_and_dumps(tmp_path, capsys):
    code, _, _ = _run(["spectrum", "--geometry", "l_shape", "--params", "1,1", "--h", "0.125",
                       "--modes", "2", "--out", str(tmp_path), "--set", "output.mesh=true",
                       "--set", "output.fields=true"], capsys)
    assert code == 0
    rows = list(csv.DictReader(open(tmp_path / "spectrum.csv")))
    assert len(rows) == 2
    assert {"index", "lambda", "lambda_over_pi2", "lambda_h", "lambda_2h", "trapped"} <= set(rows[0])
    nodes, tris, _, _ = read_mesh(tmp_path / "mesh.txt")
    fields = list(csv.DictReader(open(tmp_path / "fields.csv")))
    assert len(fields) == len(nodes) and {"x", "y", "u1", "u2"} <= set(fields[0])
    assert len(tris) > 0


def test_determinism(tmp_path, capsys):
    argv = ["spectrum", "--geometry", "cross", "--params", "1,1,1,1", "--h", "0.125",
            "--modes", "3", "--format", "json"]
    a = tmp_path / "a"
    b = tmp_path / "b"
    assert _run(argv + ["--out", str(a)], capsys)[0] == 0
    assert _run(argv + ["--out", str(b)], capsys)[0] == 0
    assert (a / "spectrum.json").read_bytes() == (b / "spectrum.json").read_bytes()


def test_sweep_rows_ordered_with_workers(capsys):
    argv = ["sweep", "--geometry", "l_shape", "--params", "1,1", "--h", "0.25",
            "--set", "sweep.start=0.5", "--set", "sweep.stop=2.0", "--set", "sweep.step=0.5",
            "--set", "solver.extrapolate=false"]
    code, serial, _ = _run(argv + ["--jobs", "1"], capsys)
    assert code == 0
    code, pooled, _ = _run(argv + ["--jobs", "2"], capsys)
    assert code == 0
    assert serial == pooled
    rows = list(csv.DictReader(io.StringIO(serial)))
    values = [float(r["value"]) for r in rows]
    assert values == [0.5, 1.0, 1.5, 2.0]
    lam = [float(r["lambda1"]) for r in rows]
    assert all(x >= y for x, y in zip(lam, lam[1:]))


def test_reduced_json_keys(capsys):
    code, out, _ = _run(["reduced", "--geometry", "l_shape", "--params", "2,2", "--h", "0.125",
                         "--format", "json"], capsys)
    assert code == 0
    d = json.loads(out)
    assert {"mu1_at_pi2", "fixed_point", "iterations", "N", "h", "monotone_check"} <= set(d)


def test_reduced_triangle_null_fixed_point(capsys):
    code, out, _ = _run(["reduced", "--geometry", "truncated_l", "--params", "0,2,2",
                         "--h", "0.125", "--format", "json"], capsys)
    assert code == 0
    assert json.loads(out)["fixed_point"] is None


def test_bent_coeffs_columns(capsys):
    code, out, _ = _run(["bent-coeffs", "--set", "bent.alpha=0.25,0.5", "--set", "bent.N=200"],
                        capsys)
    assert code == 0
    rows = list(csv.DictReader(io.StringIO(out)))
    assert {"alpha", "beta", "sigma", "kappa_bound", "kappa_direct", "eta_bound",
            "eta_direct", "a_th", "label"} <= set(rows[0])
    assert [r["label"] for r in rows] == ["scan", "scan", "max_bound", "max_direct"]


def test_decay_csv(capsys):
    code, out, _ = _run(["decay", "--geometry", "l_shape", "--params", "2,2", "--h", "0.125"],
                        capsys)
    assert code == 0
    rows = list(csv.DictReader(io.StringIO(out)))
    summary = [r for r in rows if r["predicted_rate"]]
    profile = [r for r in rows if r["x"]]
    assert len(summary) == 2 and len(profile) > 10


def test_amin_no_crossing_reports_false(capsys):
    code, out, _ = _run(["amin", "--geometry", "truncated_l", "--params", "0,1,1",
                         "--h", "0.25", "--set", "amin.lo=1", "--set", "amin.hi=4"], capsys)
    assert code == 0
    row = next(csv.DictReader(io.StringIO(out)))
    assert row["crossing"] == "False"


@pytest.mark.parametrize("argv", [
    ["spectrum", "--geometry", "hexagon"],
    ["spectrum", "--geometry", "l_shape", "--params", "1,1", "--set", "solver.bogus=1"],
    ["spectrum", "--geometry", "l_shape", "--params", "1,1", "--h", "-0.1"],
    ["condition", "--geometry", "l_shape", "--params", "1,1"],
    ["spectrum", "--format", "xml"],
    ["reproduce", "fig99"],
])
def test_validation_errors_exit_2(argv, capsys):
    code, _, err = _run(argv, capsys)
    assert code == 2
    if err.strip().startswith("{"):
        assert json.loads(err.strip().splitlines()[-1])["error"] == "validation"


def test_solver_failure_exit_3(monkeypatch, capsys):
    def boom(*a, **k):
        raise SolverError("no convergence")
    monkeypatch.setattr(cli, "solve_domain", boom)
    code, _, err = _run(["spectrum", "--geometry", "l_shape", "--params", "1,1"], capsys)
    assert code == 3
    d = json.loads(err.strip().splitlines()[-1])
    assert d["error"] == "solver" and d["type"] == "SolverError"

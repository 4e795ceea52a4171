import json

import pytest

from muentropy import cli
from muentropy.io import read_csv
from muentropy.polytope import load_system, system_hash

BL = {"dim": 2, "measure": "lattice", "halfspaces": [
    {"normal": [0, 1], "offset": 1}, {"normal": [-1, -1], "offset": 1},
    {"normal": [1, 0], "offset": 1}, {"normal": [1, 1], "offset": 1}]}


@pytest.fixture
def bl_file(tmp_path):
    p = tmp_path / "bl.json"
    p.write_text(json.dumps(BL))
    return p


def test_validate(bl_file, tmp_path, capsys):
    emit = tmp_path / "norm.json"
    assert cli.main(["validate", str(bl_file), "--emit", str(emit)]) == 0
    out = capsys.readouterr().out
    assert "dim=2" in out and "simple=true" in out and "vol=4" in out and "bdry=8" in out
    assert system_hash(load_system(emit)) == system_hash(load_system(bl_file))


def test_exit_codes(tmp_path, capsys):
    bad = tmp_path / "bad.json"
    bad.write_text("{not json")
    assert cli.main(["validate", str(bad)]) == cli.EXIT_PARSE
    unbounded = tmp_path / "open.json"
    unbounded.write_text(json.dumps({"dim": 2, "measure": "lattice", "halfspaces": [
        {"normal": [1, 0], "offset": 1}, {"normal": [0, 1], "offset": 1}]}))
    assert cli.main(["validate", str(unbounded)]) == cli.EXIT_GEOMETRY
    with pytest.raises(SystemExit) as e:
        cli.main(["optimize", str(bad)])
    assert e.value.code == 2


def test_report_grid(bl_file, tmp_path, capsys):
    assert cli.main(["report", str(bl_file), "--xi", "1,1", "--T", "0:1:0.5"]) == 0
    lines = capsys.readouterr().out.strip().splitlines()
    assert lines[0].split(",") == ["T", "lambda", "S", "U", "F", "na_mu", "sigma", "na_mu_lambda"]
    assert len(lines) == 4
    assert cli.main(["report", str(bl_file), "--xi", "1,1,1"]) == cli.EXIT_PARSE


def test_optimize_deterministic(bl_file, tmp_path):
    a, b = tmp_path / "a.json", tmp_path / "b.json"
    for p in (a, b):
        assert cli.main(["optimize", str(bl_file), "--T", "1", "--starts", "2", "--seed", "7",
                         "--out", str(p)]) == 0
    assert a.read_bytes() == b.read_bytes()
    assert (tmp_path / "a.json.manifest.json").exists()
    out = json.loads(a.read_text())
    assert set(out) >= {"q_star", "report", "diagnostics"}


def test_optimize_linear(bl_file, capsys):
    assert cli.main(["optimize", str(bl_file), "--lambda", "0", "--linear"]) == 0
    out = json.loads(capsys.readouterr().out)
    assert out["diagnostics"]["residual"] < 1e-8
    assert cli.main(["optimize", str(bl_file), "--lambda", "1"]) == cli.EXIT_PARSE


def test_estimates_csv_deterministic(bl_file, tmp_path):
    paths = [tmp_path / "p1.csv", tmp_path / "p2.csv"]
    for p in paths:
        assert cli.main(["estimates", "poincare", str(bl_file), "--trials", "10", "--seed", "3",
                         "--out", str(p)]) == 0
    assert paths[0].read_bytes() == paths[1].read_bytes()
    assert cli.main(["estimates", "meanvalue", str(bl_file), "--trials", "10",
                     "--out", str(tmp_path / "mv.csv")]) == 0
    _, rows = read_csv(tmp_path / "mv.csv")
    assert all(lhs <= rhs for _, lhs, rhs in rows)


def test_thermo_equilibrium_out_of_range(bl_file):
    assert cli.main(["thermo", "equilibrium", str(bl_file), "--U", "10", "--starts", "1"]) \
        == cli.EXIT_PARSE


def test_example_blowup(tmp_path, capsys):
    assert cli.main(["example", "blowup-cp2", "--out", str(tmp_path / "ex")]) == 0
    header, rows = read_csv(tmp_path / "ex" / "curve.csv")
    assert len(rows) == 601 and max(r[-1] for r in rows) <= 1e-8
    _, tab = read_csv(tmp_path / "ex" / "x_lambda.csv")
    assert [r[0] for r in tab] == [0.0, -0.25, -0.5, -1.0]
    assert (tmp_path / "ex" / "manifest.json").exists()

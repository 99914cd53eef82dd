import csv
import io
import json
import subprocess
import sys

import pytest

from discrimdes.cli import main

LIN_CUBIC = {
    "true_model": {"polynomial": {"coefficients": [1, 1, 0, 1]}},
    "rival": {"basis": {"monomials_upto": 1}},
    "criterion": "T",
}


@pytest.fixture
def spec_file(tmp_path):
    def write(spec, name="spec.json"):
        p = tmp_path / name
        p.write_text(json.dumps(spec))
        return str(p)

    return write


def run(argv, capsys):
    code = main(argv)
    out, err = capsys.readouterr()
    return code, out, err


def test_solve_prints_family_and_value(spec_file, capsys):
    code, out, _ = run(["solve", "--spec", spec_file(LIN_CUBIC)], capsys)
    assert code == 0
    assert "0.0625" in out
    for x in ("-1", "-0.5", "0.5", "1"):
        assert x in out


def test_approx_table_final_row(spec_file, capsys):
    code, out, _ = run(["approx", "--spec", spec_file(LIN_CUBIC)], capsys)
    assert code == 0
    last = [ln for ln in out.splitlines() if "1.7500" in ln]
    assert last and "1.0000" in last[-1]
    code, out, _ = run(["approx", "--spec", spec_file(LIN_CUBIC), "--json", "-"], capsys)
    data = json.loads(out)
    assert data["sup_error"] == pytest.approx(0.25, abs=1e-8)


def test_solve_verify_round_trip(spec_file, tmp_path, capsys):
    out_path = tmp_path / "design.json"
    assert run(["solve", "--spec", spec_file(LIN_CUBIC), "--json", str(out_path)], capsys)[0] == 0
    emitted = json.loads(out_path.read_text())["design"]
    code, out, _ = run(["verify", "--spec", spec_file(LIN_CUBIC), "--design", str(out_path), "--json", "-"], capsys)
    assert code == 0
    data = json.loads(out)
    assert data["design"] == emitted
    assert data["report"]["verdict"] == "optimal"


def test_enumerate_outputs_polytope(spec_file, capsys):
    code, out, _ = run(["enumerate", "--spec", spec_file(LIN_CUBIC), "--json", "-"], capsys)
    assert code == 0
    poly = json.loads(out)["polytope"]
    assert poly["free_dimension"] == 1 and len(poly["vertices"]) == 2
    assert len(poly["constraint_matrix"]) == 3


def test_solve_exponential_and_ds(spec_file, capsys):
    spec = {
        "true_model": {"exponential_sum": {"terms": [[1, -1], [1, 2]]}},
        "rival": {"exponential_sum": {"n_terms": 1}},
        "criterion": "T",
    }
    code, out, _ = run(["solve", "--spec", spec_file(spec), "--json", "-"], capsys)
    assert code == 0
    pts = json.loads(out)["design"]["points"]
    assert len(pts) == 3 and pts[0] == pytest.approx(-1.0)
    spec["criterion"] = "D1"
    code, out, _ = run(["solve", "--spec", spec_file(spec), "--json", "-"], capsys)
    assert code == 0 and len(json.loads(out)["design"]["points"]) == 4


def test_power_curve_csv(spec_file, tmp_path, capsys):
    spec = dict(LIN_CUBIC)
    spec["design"] = {"points": [-1, -0.5, 0.5, 1], "weights": [1 / 6, 1 / 3, 1 / 3, 1 / 6]}
    spec["simulation"] = {"reps": 200, "sweep": {"index": 3, "values": [0, 0.5, 1]}}
    target = tmp_path / "curve.csv"
    code, _, _ = run(["power-curve", "--spec", spec_file(spec), "--csv", str(target), "--seed", "7"], capsys)
    assert code == 0
    rows = list(csv.reader(io.StringIO(target.read_text(encoding="utf-8"))))
    assert rows[0] == ["value", "estimate", "std_error"]
    assert [float(r[0]) for r in rows[1:]] == [0, 0.5, 1]
    assert float(rows[-1][1]) >= float(rows[1][1])


def test_simulate_seed_flag_is_reproducible(spec_file, capsys):
    spec = dict(LIN_CUBIC)
    spec["design"] = {"points": [-1, -0.5, 0.5, 1], "weights": [1 / 6, 1 / 3, 1 / 3, 1 / 6]}
    spec["simulation"] = {"reps": 200, "kind": "mse"}
    path = spec_file(spec)
    outs = [run(["simulate", "--spec", path, "--seed", "3", "--threads", t, "--json", "-"], capsys)[1] for t in ("1", "2")]
    assert json.loads(outs[0]) == json.loads(outs[1])


def test_malformed_spec_reports_path(spec_file, capsys):
    bad = {"true_model": {"polynomial": {"coefficients": [1, "x"]}}, "rival": {"basis": {"monomials_upto": 1}}}
    code, _, err = run(["solve", "--spec", spec_file(bad)], capsys)
    assert code == 1
    payload = json.loads(err)
    assert payload["path"] == ["true_model", "polynomial", "coefficients", "1"]


@pytest.mark.parametrize(
    "argv",
    [
        ["solve", "--spec", "/nonexistent/spec.json"],
        ["frobnicate", "--spec", "x.json"],
        ["solve"],
    ],
)
def test_usage_errors_exit_1(argv, capsys):
    code, _, err = run(argv, capsys)
    assert code == 1
    assert json.loads(err.strip().splitlines()[-1])["exit_code"] == 1


def test_flag_validation(spec_file, capsys):
    path = spec_file(LIN_CUBIC)
    assert run(["solve", "--spec", path, "--threads", "0"], capsys)[0] == 1
    assert run(["solve", "--spec", path, "--tol", "-1"], capsys)[0] == 1
    assert run(["solve", "--spec", path, "--csv", "out.csv"], capsys)[0] == 1


def test_numerical_failure_exit_2(spec_file, capsys):
    spec = dict(LIN_CUBIC, algorithm="chebyshev")
    code, _, err = run(["solve", "--spec", spec_file(spec)], capsys)
    assert code == 2
    assert json.loads(err)["error"] == "WrongAlternationCount"


def test_console_script_entry_point(spec_file):
    out = subprocess.run(
        [sys.executable, "-m", "discrimdes.cli", "approx", "--spec", spec_file(LIN_CUBIC)],
        capture_output=True,
        text=True,
    )
    assert out.returncode == 0 and "1.7500" in out.stdout

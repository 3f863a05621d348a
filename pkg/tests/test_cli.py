import csv
import io
import json
import subprocess
import sys

import pytest

from hypflow.cli import main


def run(capsys, *argv):
    code = main(list(argv))
    out, err = capsys.readouterr()
    return code, out, err


def test_gaps_json(capsys):
    code, out, _ = run(capsys, "gaps", "--p", "3", "--format", "json")
    assert code == 0
    d = json.loads(out)
    assert d["deformation_lower"] == "26/9"
    assert d["scalar_bottom"] == "8/9"


def test_gaps_compare_csv(capsys):
    code, out, _ = run(capsys, "gaps", "--compare-laplacians", "--format", "csv")
    assert code == 0
    rows = list(csv.reader(io.StringIO(out)))
    assert [r[1] for r in rows[1:]] == ["0", "2", "4"]


def test_gaps_table(capsys):
    code, out, _ = run(capsys, "gaps", "--p", "3/2")
    assert code == 0 and "8/9" in out


def test_exponents(capsys):
    code, out, _ = run(capsys, "exponents", "--p", "3", "--q", "6", "--format", "json")
    d = json.loads(out)
    assert code == 0
    assert (d["beta"], d["delta"], d["scaling_exponent"]) == ("1/4", "3/4", "0")


def test_kernel_with_mass(capsys):
    code, out, _ = run(capsys, "kernel", "--t", "1", "--r", "0", "1", "--check-mass",
                       "--format", "json")
    d = json.loads(out)
    assert code == 0 and d["mass_pass"]
    assert d["value"][0] == pytest.approx(0.00825830126612423, rel=1e-14)


def test_integral_sweep_csv(capsys):
    code, out, _ = run(capsys, "integral", "--p", "3", "--q", "6", "--sweep-t", "0.1:10:3")
    assert code == 0
    rows = list(csv.DictReader(io.StringIO(out)))
    assert len(rows) == 3
    assert all(float(r["I"]) <= float(r["bound"]) for r in rows)


def test_integral_divergent_exit_zero(capsys):
    code, out, err = run(capsys, "integral", "--p", "2", "--q", "6", "--t", "1")
    assert code == 0
    assert "divergent" in err
    assert list(csv.DictReader(io.StringIO(out)))[0]["I"] == "inf"


def test_contraction(capsys):
    code, out, _ = run(capsys, "contraction", "--u0", "0.2", "--format", "json")
    d = json.loads(out)
    assert code == 0 and d["converged"]
    assert d["limit"] == pytest.approx(0.276393202250021, abs=1e-9)
    code, out, _ = run(capsys, "contraction", "--u0", "0.3", "--format", "json")
    assert code == 0 and not json.loads(out)["converged"]


def test_simulate_csv_and_output_file(capsys, tmp_path):
    target = tmp_path / "traj.csv"
    code, out, err = run(capsys, "simulate", "--modes", "6", "--t-end", "5", "--gap", "2",
                         "--output", str(target))
    assert code == 0 and out == ""
    assert "fitted tail rate" in err
    lines = target.read_text().splitlines()
    assert lines[0] == "t,l2_norm" and len(lines) == 102


def test_simulate_is_reproducible(capsys):
    args = ("simulate", "--modes", "6", "--t-end", "2", "--seed", "7")
    assert run(capsys, *args)[1] == run(capsys, *args)[1]


def test_compare_small(capsys):
    code, out, _ = run(capsys, "compare", "--modes", "8", "--t-end", "100", "--format", "json")
    assert code == 0
    assert json.loads(out)["checks"]["ordered"]


@pytest.mark.parametrize("argv", [
    ["gaps", "--p", "1/2"],
    ["exponents", "--p", "0", "--q", "6"],
    ["integral", "--p", "3", "--t", "-1"],
    ["integral", "--p", "3", "--sweep-t", "bad"],
    ["contraction", "--u0", "-1"],
    ["simulate", "--gap", "3"],
    ["compare", "--gaps", "2"],
    ["nonsense"],
    [],
])
def test_bad_parameters_exit_one(capsys, argv):
    code, out, err = run(capsys, *argv)
    assert code == 1
    assert out == ""
    assert err


def test_module_entry_point():
    proc = subprocess.run([sys.executable, "-m", "hypflow", "gaps", "--p", "2",
                           "--format", "json"], capture_output=True, text=True, check=False)
    assert proc.returncode == 0
    assert json.loads(proc.stdout)["exact_l2"] == "4"

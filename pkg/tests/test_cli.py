"""Command-line interface: orchestration, output formats, exit codes."""

import json
import subprocess
import sys

import numpy as np
import pytest

from poincarelab.cli import main
from poincarelab.grid import GridFunction, RootBox


@pytest.fixture()
def step_weight_file(tmp_path):
    g = GridFunction(RootBox.unit(1), 1, np.array([1.0, 3.0]))
    path = tmp_path / "w.json"
    g.save(path)
    return str(path)


@pytest.fixture()
def spike_file(tmp_path):
    g = GridFunction(RootBox.unit(1), 2, np.array([3.0, 1.0, 1.0, 1.0]))
    path = tmp_path / "h.json"
    g.save(path)
    return str(path)


def test_constants_from_weight_file(step_weight_file, tmp_path):
    out = tmp_path / "c.json"
    rc = main(["constants", "--weight", step_weight_file, "--p", "2",
               "--out", str(out)])
    assert rc == 0
    d = json.loads(out.read_text())
    assert d["ap"] == pytest.approx(4 / 3)
    assert d["a1"] == pytest.approx(2.0)
    assert d["config"]["command"] == "constants"


def test_constants_deterministic_bytes(tmp_path):
    outs = []
    for name in ("a.json", "b.json"):
        out = tmp_path / name
        rc = main(["constants", "--power-weight", "delta=0.5", "n=1",
                   "--depth", "6", "--out", str(out)])
        assert rc == 0
        outs.append(out.read_bytes())
    assert outs[0] == outs[1]


def test_constants_flags_before_subcommand(tmp_path):
    out = tmp_path / "c.json"
    rc = main(["--depth", "5", "constants", "--power-weight", "delta=0.5",
               "n=1", "--out", str(out)])
    assert rc == 0
    assert json.loads(out.read_text())["config"]["depth"] == 5


def test_constants_csv_format(step_weight_file, tmp_path):
    out = tmp_path / "c.csv"
    rc = main(["constants", "--weight", step_weight_file, "--format", "csv",
               "--out", str(out)])
    assert rc == 0
    lines = out.read_text().strip().splitlines()
    assert lines[0].startswith("constant,")
    assert any(line.startswith("ap,") for line in lines)


def test_constants_requires_weight_source():
    assert main(["constants"]) == 1


def test_cz_stopping_oracle(spike_file, tmp_path):
    out = tmp_path / "s.json"
    rc = main(["cz", "--input", spike_file, "--L", "2", "--emit", "stopping",
               "--out", str(out)])
    assert rc == 0
    assert json.loads(out.read_text()) == [[2, [0]]]


def test_cz_report(spike_file, tmp_path):
    out = tmp_path / "r.json"
    rc = main(["cz", "--input", spike_file, "--L", "2", "--out", str(out)])
    assert rc == 0
    d = json.loads(out.read_text())
    assert d["omega_fraction"] == 0.25
    assert d["reconstruction_error"] == 0.0


def test_cz_rejects_large_average(tmp_path):
    g = GridFunction(RootBox.unit(1), 2, np.full(4, 9.0))
    path = tmp_path / "big.json"
    g.save(path)
    assert main(["cz", "--input", str(path), "--L", "2"]) == 1


def test_functional_check(tmp_path):
    config = {"variant": "fractional", "n": 1, "alpha": 1.0,
            "mu": "lebesgue", "w": "lebesgue"}
    fpath = tmp_path / "a.json"
    fpath.write_text(json.dumps(config))
    out = tmp_path / "fc.json"
    rc = main(["functional-check", "--functional", str(fpath), "--p", "1",
               "--Ls", "2,4", "--mode", "exhaustive", "--depth", "4",
               "--out", str(out)])
    assert rc == 0
    d = json.loads(out.read_text())
    assert d["violations"] == 0
    assert d["per_L"]["2.0"] == pytest.approx(0.25)


def test_poincare_check(tmp_path):
    x = np.linspace(0, 1, 17)[:-1] + 1 / 32
    g = GridFunction(RootBox.unit(1), 4, x)
    path = tmp_path / "f.json"
    g.save(path)
    out = tmp_path / "p.json"
    rc = main(["poincare", "--id", "pp-two-weight", "--input", str(path),
               "--p", "1", "--out", str(out)])
    assert rc == 0
    d = json.loads(out.read_text())
    assert d["lhs"] == pytest.approx(0.25)
    assert d["passed"] is True


def test_sharpness_command(tmp_path):
    out = tmp_path / "sh.json"
    rc = main(["sharpness", "--p", "1", "--n", "2", "--eps", "0.1",
               "--deltas", "0.5,0.25", "--depth", "4", "--out", str(out)])
    assert rc == 0
    d = json.loads(out.read_text())
    assert len(d["deltas"]) == 2 and "beta_hat" in d


def test_rdf_command(tmp_path, step_weight_file):
    rng = np.random.default_rng(0)
    h = GridFunction(RootBox.unit(1), 1, np.array([1.0, 2.0]))
    path = tmp_path / "h.json"
    h.save(path)
    out = tmp_path / "rdf.json"
    rc = main(["rdf", "--input", str(path), "--weight", step_weight_file,
               "--p", "2", "--terms", "5", "--out", str(out)])
    assert rc == 0
    d = json.loads(out.read_text())
    assert d["terms"] == 5
    assert len(d["majorant"]["values"]) == 2
    assert all(r >= v for r, v in zip(d["majorant"]["values"],
                                      h.values.tolist()))


def test_report_command(tmp_path):
    out = tmp_path / "rep.json"
    rc = main(["report", "--power-weight", "delta=0.25", "n=1",
               "--depth", "5", "--out", str(out)])
    assert rc == 0
    d = json.loads(out.read_text())
    assert d["constants"]["a1"] > 1.0


def test_usage_error_exit_code():
    with pytest.raises(SystemExit) as exc:
        main(["cz"])  # missing required --input
    assert exc.value.code == 2


def test_console_entry_point():
    proc = subprocess.run(
        [sys.executable, "-m", "poincarelab.cli", "constants",
         "--power-weight", "delta=0.5", "n=1", "--depth", "4"],
        capture_output=True, text=True)
    assert proc.returncode == 0
    assert json.loads(proc.stdout)["a1"] > 1.0

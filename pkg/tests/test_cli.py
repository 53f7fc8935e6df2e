import json
import subprocess
import sys
from pathlib import Path

import numpy as np
import pytest

from viscsol.analytic import neumann_exact
from viscsol.cli import main

CONFIGS = Path(__file__).resolve().parent.parent / "configs"


def run(tmp_path, cmd, name, *extra):
    out = tmp_path / name
    code = main([cmd, "--config", str(CONFIGS / f"{name}.json"), "--out", str(out), *extra])
    return code, out


def summary(out):
    return json.loads((out / "summary.json").read_text())


def test_zero_operator_returns_initial(tmp_path):
    code, out = run(tmp_path, "solve", "zero")
    assert code == 0
    s = summary(out)
    assert s["iters"] == 0 and s["residual"] == 0.0 and s["comparison_warnings"]
    data = np.loadtxt(out / "solution.csv", delimiter=",", skiprows=1)
    assert np.array_equal(data[:, 2], data[:, 0] * data[:, 1] + 1)


def test_neumann_solve(tmp_path):
    code, out = run(tmp_path, "solve", "neumann")
    assert code == 0 and summary(out)["residual"] <= 1e-8
    data = np.loadtxt(out / "solution.csv", delimiter=",", skiprows=1)
    assert np.max(np.abs(data[:, 1] - neumann_exact(0.01, data[:, 0]))) <= 5e-3


def test_certify_exit_codes(tmp_path):
    code, out = run(tmp_path, "certify", "certify_abs")
    assert code == 0 and summary(out)["verdict"] == "pass"
    code, out = run(tmp_path, "certify", "certify_abs_super")
    assert code == 3
    s = summary(out)
    assert s["verdict"] == "fail" and s["failures"] == 1
    rows = np.loadtxt(out / "certify_failures.csv", delimiter=",", skiprows=1, ndmin=2)
    assert rows[0, 1] == 0.0 and rows[0, 2] == -1.0


def test_flow_heat(tmp_path):
    code, out = run(tmp_path, "flow", "heat")
    assert code == 0
    snaps = summary(out)["snapshots"]
    assert [s["t"] for s in snaps] == [0.0, 0.05]
    assert snaps[1]["max"] < snaps[0]["max"] and snaps[1]["min"] >= 0.0


def test_flow_cfl_violation(tmp_path):
    cfg = json.loads((CONFIGS / "heat.json").read_text())
    cfg["flow"]["dt"] = 1.0
    path = tmp_path / "bad.json"
    path.write_text(json.dumps(cfg))
    assert main(["flow", "--config", str(path), "--out", str(tmp_path / "o")]) == 2


def test_doubling_and_supconv(tmp_path):
    code, out = run(tmp_path, "doubling", "doubling")
    assert code == 0
    assert all(c["nonincreasing"] and c["penalty_bound"] for c in summary(out)["checks"])
    code, out = run(tmp_path, "supconv", "supconv")
    assert code == 0
    assert all(r["dominates"] and r["convexity_defects"] == 0 for r in summary(out)["results"])


def test_convergence(tmp_path):
    code, out = run(tmp_path, "convergence", "eikonal", "--refinements", "3")
    assert code == 0
    s = summary(out)
    assert len(s["errors"]) == 3 and s["monotone_decreasing"] and not s["flagged"]


def test_malformed_json(tmp_path, capsys):
    path = tmp_path / "broken.json"
    path.write_text('{\n  "domain": {"lo": [0.0],\n  oops\n}\n')
    assert main(["solve", "--config", str(path), "--out", str(tmp_path / "o")]) == 1
    assert "line 3" in capsys.readouterr().err


@pytest.mark.parametrize(
    "patch",
    [
        {"operator": {"id": "nope"}},
        {"operator": {"id": "expr", "expr": "__import__('os')"}},
        {"domain": {"lo": [0.0], "hi": [1.0], "n": "many"}},
    ],
)
def test_bad_config_fields(tmp_path, patch):
    cfg = json.loads((CONFIGS / "eikonal.json").read_text())
    cfg.update(patch)
    path = tmp_path / "c.json"
    path.write_text(json.dumps(cfg))
    assert main(["solve", "--config", str(path), "--out", str(tmp_path / "o")]) == 1


def test_negative_threads(tmp_path):
    assert main(["solve", "--config", str(CONFIGS / "zero.json"), "--out", str(tmp_path), "--threads", "-1"]) == 1


def test_deterministic_outputs(tmp_path):
    a = run(tmp_path / "a", "solve", "eikonal")[1]
    b = run(tmp_path / "b", "solve", "eikonal", "--threads", "4")[1]
    for f in ("solution.csv", "summary.json", "iterations.csv"):
        assert (a / f).read_bytes() == (b / f).read_bytes()


def test_module_entry_point(tmp_path):
    proc = subprocess.run(
        [sys.executable, "-m", "viscsol.cli", "solve", "--config", str(CONFIGS / "zero.json"), "--out", str(tmp_path)],
        capture_output=True,
        text=True,
    )
    assert proc.returncode == 0
    assert (tmp_path / "summary.json").exists()

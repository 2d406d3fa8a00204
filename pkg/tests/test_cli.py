import hashlib
import json
import os
import subprocess
import sys

import pytest

from spikelab import cli
from spikelab.errors import ConfigError


def _run(args, cwd):
    return subprocess.run([sys.executable, "-m", "spikelab.cli", *args], cwd=cwd, capture_output=True, text=True)


def _error(proc):
    return json.loads(proc.stderr.strip().splitlines()[-1])


def test_scenario_round_trip():
    model = {"kind": "schnakenberg", "params": {"a": 0.2, "b": 1.0}, "epsilon": 0.01, "D": 2.0}
    sc = cli.Scenario("t", "thresholds", model, {"K": 2})
    again = cli.Scenario.from_json(sc.to_json())
    assert again.to_dict() == sc.to_dict()
    assert again.options["K"] == 2.0 and again.options["mode"] == "corrected"
    assert again.model == model


@pytest.mark.parametrize(
    "data",
    [
        {"command": "thresholds", "bogus": 1},
        {"command": "frobnicate"},
        {"command": "thresholds", "model": {"kind": "schnakenberg", "params": {"a": 0.2, "b": 1.0}},
         "options": {"K": 1, "colour": "red"}},
        {"command": "simulate", "model": {"kind": "schnakenberg", "params": {"a": 0.2, "b": 1.0}},
         "options": {"n": 1.5}},
        {"command": "thresholds"},
    ],
)
def test_scenario_rejects_bad_input(data):
    with pytest.raises(ConfigError):
        cli.Scenario.from_dict(data)


def test_worker_cap(monkeypatch):
    monkeypatch.setenv("SPIKELAB_THREADS", "2")
    assert cli.worker_count(8) == 2
    assert cli.worker_count(1) == 1
    monkeypatch.setenv("SPIKELAB_THREADS", "many")
    with pytest.raises(ConfigError):
        cli.worker_count(4)
    monkeypatch.delenv("SPIKELAB_THREADS")
    assert cli.worker_count(8) == 8


def test_config_error_exit_code(tmp_path):
    p = _run(["thresholds", "--model", "schnakenberg", "--a", "0.2", "--b", "1", "--eps", "0.9"], tmp_path)
    assert p.returncode == 2
    err = _error(p)
    assert err["error"] == "ConfigError" and err["exit_code"] == 2


def test_bad_flag_is_config_error(tmp_path):
    p = _run(["thresholds", "--nonsense"], tmp_path)
    assert p.returncode == 2 and _error(p)["exit_code"] == 2


def test_solver_error_exit_code(tmp_path):
    p = _run(["simulate", "--model", "schnakenberg", "--a", "0.2", "--b", "1", "--n", "256", "--out", "o"], tmp_path)
    assert p.returncode == 3
    assert _error(p)["error"] == "ResolutionExceeded"


def test_regime_error_exit_code(tmp_path):
    p = _run(["thresholds", "--model", "schnakenberg", "--a", "1.5", "--b", "1", "--out", "o"], tmp_path)
    assert p.returncode == 4
    assert _error(p)["error"] == "RegimeMismatch"


def test_thresholds_output(tmp_path, capsys):
    out = tmp_path / "th"
    assert cli.main(["thresholds", "--model", "schnakenberg", "--a", "0.2", "--b", "1", "--out", str(out)]) == 0
    res = json.loads((out / "thresholds.json").read_text())
    assert res["kind"] == "replication"
    assert res["L_crit"] == pytest.approx(1.9818, abs=1e-4)
    man = json.loads((out / "manifest.json").read_text())
    files = {e["file"]: e["sha256"] for e in man["outputs"]}
    assert set(files) == {"thresholds.json", "thresholds.csv"}
    assert files["thresholds.csv"] == hashlib.sha256((out / "thresholds.csv").read_bytes()).hexdigest()
    assert man["exit_code"] == 0
    assert json.loads(capsys.readouterr().out)["kind"] == "replication"


def test_dump_scenario_and_replay(tmp_path, capsys):
    args = ["phase-diagram", "--model", "schnakenberg", "--grid", "4x2", "--out", str(tmp_path / "a")]
    assert cli.main(args + ["--dump-scenario"]) == 0
    text = capsys.readouterr().out
    sc = cli.Scenario.from_json(text)
    assert sc.options["grid"] == "4x2"
    path = tmp_path / "sc.json"
    path.write_text(text)
    assert cli.main(args) == 0
    assert cli.main(["phase-diagram", "--scenario", str(path), "--out", str(tmp_path / "b")]) == 0
    a, b = tmp_path / "a", tmp_path / "b"
    produced = sorted(f for f in os.listdir(a) if f != "manifest.json")
    assert "phase_diagram.csv" in produced and any(f.endswith(".svg") for f in produced)
    for name in produced:
        assert (a / name).read_bytes() == (b / name).read_bytes(), name


def test_scenario_for_wrong_command(tmp_path):
    sc = cli.Scenario("x", "phase-diagram", {"kind": "brusselator"})
    path = tmp_path / "sc.json"
    path.write_text(sc.to_json())
    with pytest.raises(SystemExit) as exc:
        cli.main(["thresholds", "--scenario", str(path)])
    assert exc.value.code == 2

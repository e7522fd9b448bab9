import json
from pathlib import Path

import pytest

from rptlab.cli import main

CONFIGS = Path(__file__).resolve().parents[1] / "configs"
QUICK = ["flow_tricomi", "scatter_wave1d_disk", "raytransform_wave1d", "holonomy_magnetic", "roots_quartic"]


def _write(tmp_path, cfg):
    p = tmp_path / "cfg.json"
    p.write_text(json.dumps(cfg))
    return p


@pytest.mark.parametrize("name", QUICK)
def test_example_configs_run(tmp_path, name):
    cfg = json.loads((CONFIGS / f"{name}.json").read_text())
    assert main([cfg["task"], "--config", str(CONFIGS / f"{name}.json"), "--out", str(tmp_path)]) == 0
    manifest = json.loads((tmp_path / "manifest.json").read_text())
    assert manifest["status"] == 0 and manifest["task"] == cfg["task"]
    assert len(manifest["config_sha256"]) == 64
    for f in manifest["result"]["files"]:
        assert (tmp_path / f).exists()


@pytest.mark.parametrize("name", ["scatter_wave1d_disk", "roots_quartic"])
def test_reruns_are_byte_identical(tmp_path, name):
    cfg = CONFIGS / f"{name}.json"
    task = json.loads(cfg.read_text())["task"]
    a, b = tmp_path / "a", tmp_path / "b"
    assert main([task, "--config", str(cfg), "--out", str(a), "--seed", "7"]) == 0
    assert main([task, "--config", str(cfg), "--out", str(b), "--seed", "7"]) == 0
    csvs = sorted(p.name for p in a.glob("*.csv"))
    assert csvs
    for n in csvs:
        assert (a / n).read_bytes() == (b / n).read_bytes()


def test_flow_outputs(tmp_path):
    assert main(["flow", "--config", str(CONFIGS / "flow_tricomi.json"), "--out", str(tmp_path)]) == 0
    summary = json.loads((tmp_path / "summary.json").read_text())
    assert summary["drift"] <= 1e-8
    header = (tmp_path / "curve.csv").read_text().splitlines()[0]
    assert header.startswith("t,")


@pytest.mark.parametrize("cfg, pointer", [
    ({"task": "flow", "operator": {"name": "wave1d"}, "domain": {"name": "disk"},
      "params": {"start": {"x": [0, 0], "xi": [1, 1]}, "bogus": 1}}, "/params"),
    ({"task": "flow", "operator": {"name": "nope"}, "domain": {"name": "disk"},
      "params": {"start": {"x": [0, 0], "xi": [1, 1]}}}, "/operator"),
    ({"task": "flow", "operator": {"name": "wave1d"}, "domain": {"name": "disk"}}, ""),
    ({"task": "flow", "operator": {"name": "wave1d"}, "domain": {"name": "disk"}, "params": {}}, ""),
])
def test_invalid_config_exits_2(tmp_path, capsys, cfg, pointer):
    assert main(["flow", "--config", str(_write(tmp_path, cfg)), "--out", str(tmp_path / "o")]) == 2
    err = capsys.readouterr().err
    assert "ConfigError" in err or "Error" in err
    if pointer:
        assert pointer in err


def test_bad_expression_exits_2(tmp_path):
    cfg = {"task": "flow", "operator": {"name": "wave1d", "params": {"c": "1 + * x1"}}, "domain": {"name": "disk"},
           "params": {"start": {"x": [0, 0], "xi": [1, 1]}}}
    assert main(["flow", "--config", str(_write(tmp_path, cfg)), "--out", str(tmp_path / "o")]) == 2


def test_numerical_failure_exits_3(tmp_path, capsys):
    cfg = {"task": "flow", "operator": {"name": "wave1d"}, "domain": {"name": "disk"},
           "params": {"start": {"x": [3, 0], "xi": [1, 1]}}}
    assert main(["flow", "--config", str(_write(tmp_path, cfg)), "--out", str(tmp_path / "o")]) == 3
    assert "StartsOutside" in capsys.readouterr().err


def test_task_mismatch_rejected(tmp_path):
    assert main(["scatter", "--config", str(CONFIGS / "flow_tricomi.json"), "--out", str(tmp_path)]) == 2


def test_config_required_outside_verify(tmp_path):
    assert main(["flow", "--out", str(tmp_path)]) == 2


def test_verify_subset_passes(tmp_path):
    cfg = _write(tmp_path, {"task": "verify", "params": {"suite": "fast", "criteria": [3, 10]}})
    assert main(["verify", "--config", str(cfg), "--out", str(tmp_path / "o")]) == 0
    report = json.loads((tmp_path / "o" / "report.json").read_text())
    assert [c["criterion"] for c in report["criteria"]] == [3, 10]
    assert report["passed"]


def test_verify_failure_exits_1(tmp_path):
    cfg = _write(tmp_path, {"task": "verify", "params": {"criteria": [8]}})
    assert main(["verify", "--config", str(cfg), "--out", str(tmp_path / "o")]) == 1
    manifest = json.loads((tmp_path / "o" / "manifest.json").read_text())
    assert manifest["status"] == 1 and manifest["result"]["failed"] == [8]


def test_verify_figures(tmp_path):
    pytest.importorskip("matplotlib")
    cfg = _write(tmp_path, {"task": "verify", "params": {"criteria": [10]}})
    assert main(["verify", "--config", str(cfg), "--out", str(tmp_path / "o"), "--figures"]) == 0


def test_version(capsys):
    with pytest.raises(SystemExit) as info:
        main(["--version"])
    assert info.value.code == 0
    assert "rptlab" in capsys.readouterr().out

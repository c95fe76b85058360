"""
命令行测试：退出码、输出文件、运行日志
"""
import json
import os

import pytest

from wquant import cli
from wquant.harness.report import SweepReport


def write_json(path, payload):
    with open(path, "w", encoding="utf-8") as f:
        json.dump(payload, f)
    return str(path)


def read_journal(out_dir):
    with open(os.path.join(out_dir, "run_log.jsonl"), encoding="utf-8") as f:
        return [json.loads(line) for line in f]


def test_preset_run_writes_reports(tmp_path):
    out = str(tmp_path / "uniform")
    assert cli.main(["sweep-h", "--preset", "uniform_1d_h", "--out", out, "--jobs", "2"]) == cli.EXIT_PASS
    for name in ("report.csv", "report.json", "plot.svg", "run_log.jsonl"):
        assert os.path.exists(os.path.join(out, name))
    with open(os.path.join(out, "report.json"), encoding="utf-8") as f:
        report = json.load(f)
    assert report["passed"] is True
    assert report["config"]["name"] == "uniform_1d_h"
    assert [entry["action"] for entry in read_journal(out)] == ["start", "finish"]


def test_quantize_writes_approximant(tmp_path):
    config_path = write_json(tmp_path / "quantize.json", {
        "command": "quantize",
        "measure": {"type": "uniform_cube", "dim": 2, "side": 1.0},
        "lattice": {"kind": "Zd", "dim": 2},
        "values": [0.25],
    })
    out = str(tmp_path / "quantize")
    assert cli.main(["quantize", "--config", config_path, "--out", out]) == cli.EXIT_PASS
    with open(os.path.join(out, "approximant.json"), encoding="utf-8") as f:
        approximant = json.load(f)
    assert approximant["mode"] == "dirac"
    assert sum(cell["mass"] for cell in approximant["cells"]) == pytest.approx(1.0)
    assert not os.path.exists(os.path.join(out, "plot.svg"))


def test_missing_config_is_an_error(tmp_path):
    missing = str(tmp_path / "missing.json")
    assert cli.main(["sweep-h", "--config", missing, "--out", str(tmp_path)]) == cli.EXIT_ERROR


def test_malformed_config_is_an_error(tmp_path):
    path = tmp_path / "broken.json"
    path.write_text("{not json", encoding="utf-8")
    assert cli.main(["sweep-h", "--config", str(path), "--out", str(tmp_path)]) == cli.EXIT_ERROR


def test_preset_for_another_command_is_an_error(tmp_path):
    assert cli.main(["sweep-n", "--preset", "uniform_1d_h", "--out", str(tmp_path)]) == cli.EXIT_ERROR


def test_failed_slope_window_exits_one(tmp_path):
    config_path = write_json(tmp_path / "sweep.json", {
        "command": "sweep-h",
        "measure": {"type": "uniform_cube", "dim": 1},
        "values": [0.5, 0.25, 0.125],
        "slope_window": [5.0, 6.0],
    })
    out = str(tmp_path / "slope")
    assert cli.main(["sweep-h", "--config", config_path, "--out", out]) == cli.EXIT_BOUND_FAILED
    with open(os.path.join(out, "report.json"), encoding="utf-8") as f:
        assert json.load(f)["slope_passed"] is False


def test_computation_error_is_journaled(tmp_path):
    config_path = write_json(tmp_path / "nterm.json", {
        "command": "sweep-n",
        "measure": {"type": "uniform_cube", "dim": 2},
        "values": [4, 8],
    })
    out = str(tmp_path / "nterm")
    assert cli.main(["sweep-n", "--config", config_path, "--out", out]) == cli.EXIT_ERROR
    assert read_journal(out)[-1]["action"] == "error"


def test_tail_measure_check(tmp_path):
    near = write_json(tmp_path / "near.json", {"type": "atoms", "locations": [[0.0, 0.0], [0.5, 0.0]]})
    far = write_json(tmp_path / "far.json", {"type": "atoms", "locations": [[0.0, 0.0], [5.0, 0.0]]})
    out = str(tmp_path / "tail")
    assert cli.main(["tail", "--measure", near, "--R", "1.0", "--out", out]) == cli.EXIT_PASS
    assert cli.main(["tail", "--measure", far, "--R", "1.0", "--out", out]) == cli.EXIT_BOUND_FAILED
    assert cli.main(["tail", "--measure", near, "--out", out]) == cli.EXIT_ERROR


def test_tail_density_beyond_twice_the_radius_fails(tmp_path):
    far = write_json(tmp_path / "far_density.json", {"type": "mixture", "components": [
        {"weight": 0.5, "measure": {"type": "uniform_cube", "dim": 2}},
        {"weight": 0.5, "measure": {"type": "uniform_cube", "dim": 2, "center": [5.0, 0.0]}},
    ]})
    out = str(tmp_path / "far_density")
    assert cli.main(["tail", "--measure", far, "--R", "1.0", "--out", out]) == cli.EXIT_BOUND_FAILED
    with open(os.path.join(out, "report.json"), encoding="utf-8") as f:
        report = json.load(f)
    assert report["extra"]["decay"]["conditions_pass"][0] is False


def test_tail_needs_a_source(tmp_path):
    assert cli.main(["tail", "--out", str(tmp_path)]) == cli.EXIT_ERROR


@pytest.mark.parametrize("failures, expected", [([], cli.EXIT_PASS), (["criterion 1: broken"], cli.EXIT_BOUND_FAILED)])
def test_verify_exit_codes(monkeypatch, tmp_path, failures, expected):
    calls = []

    def fake_acceptance(quick, jobs):
        calls.append((quick, jobs))
        return SweepReport("verify-quick", "verify", "parameter", extra={"criteria": [], "quick": quick},
                           extra_failures=list(failures))

    monkeypatch.setattr(cli, "run_acceptance", fake_acceptance)
    assert cli.main(["verify", "--quick", "--jobs", "3", "--out", str(tmp_path)]) == expected
    assert calls == [(True, 3)]


def test_unknown_command_exits_with_usage():
    with pytest.raises(SystemExit) as info:
        cli.main(["no-such-command"])
    assert info.value.code == 2


@pytest.mark.skipif(os.getenv("WQUANT_RUN_ACCEPTANCE") != "1", reason="设置 WQUANT_RUN_ACCEPTANCE=1 运行完整验收")
def test_quick_acceptance_suite(tmp_path):
    assert cli.main(["verify", "--quick", "--jobs", "4", "--out", str(tmp_path)]) == cli.EXIT_PASS

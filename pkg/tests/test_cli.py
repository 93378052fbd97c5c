import json

import pytest

from twotimescale.cli import main
from twotimescale.config import default_text


@pytest.fixture
def cfg_file(tmp_path):
    path = tmp_path / "small.cfg"
    path.write_text(default_text().replace("sim.M = 200", "sim.M = 6"))
    return path


def test_run_writes_outputs(tmp_path, cfg_file, capsys):
    out = tmp_path / "r"
    assert main(["run", "--config", str(cfg_file), "--controller", "proposed",
                 "--out", str(out)]) == 0
    assert {p.name for p in out.iterdir()} == {"slots.csv", "frames.csv", "summary.json",
                                               "config.cfg"}
    s = json.loads((out / "summary.json").read_text())
    assert s["slots"] == 30 and s["controller"] == "proposed"
    assert "proposed" in capsys.readouterr().out


def test_default_preset_and_slots_override(tmp_path):
    out = tmp_path / "r"
    assert main(["run", "--slots", "12", "--seed", "5", "--out", str(out)]) == 0
    s = json.loads((out / "summary.json").read_text())
    assert s["slots"] == 15 and s["seed"] == 5


def test_malformed_config_exit_code(tmp_path, capsys):
    bad = tmp_path / "bad.cfg"
    bad.write_text("sim.N = 5\nenergy.E_max = -5\n")
    assert main(["run", "--config", str(bad), "--out", str(tmp_path / "o")]) == 1
    assert "bad.cfg:2" in capsys.readouterr().err


def test_set_override_negative_capacity(tmp_path):
    assert main(["run", "--set", "energy.E_max=-1", "--out", str(tmp_path / "o")]) == 1


def test_unknown_controller(tmp_path):
    assert main(["run", "--controller", "greedy", "--slots", "5",
                 "--out", str(tmp_path / "o")]) == 1


def test_contract_violation_exit_code(tmp_path, monkeypatch):
    from twotimescale import controller

    def broken(*a, **k):
        raise controller.ContractError("slot 1: C4 violated")
    monkeypatch.setattr("twotimescale.cli.run", broken)
    assert main(["run", "--slots", "5", "--out", str(tmp_path / "o")]) == 2


def test_compare_by_summary_and_name(tmp_path, cfg_file, capsys):
    a, b = tmp_path / "a", tmp_path / "b"
    main(["run", "--config", str(cfg_file), "--controller", "proposed", "--out", str(a)])
    main(["run", "--config", str(cfg_file), "--controller", "baseline2", "--out", str(b)])
    capsys.readouterr()
    assert main(["compare", str(a / "summary.json"), str(b)]) == 0
    text = capsys.readouterr().out
    assert "energy cost reduction" in text
    assert main(["compare", "proposed", "baseline2", "--config", str(cfg_file)]) == 0
    assert "energy cost reduction" in capsys.readouterr().out


def test_sweep(tmp_path, cfg_file):
    out = tmp_path / "sw"
    assert main(["sweep", "--config", str(cfg_file), "--v-grid", "10,100,1000",
                 "--seeds", "1,2", "--out", str(out)]) == 0
    rows = (out / "sweep.csv").read_text().strip().splitlines()
    assert len(rows) == 1 + 6
    assert "avg_backlog [Mbit]" in rows[0]


def test_check_subset(capsys):
    assert main(["check", "--criteria", "2"]) == 0
    assert "[PASS] criterion  2" in capsys.readouterr().out


def test_check_failure_exit_code(monkeypatch):
    from twotimescale import acceptance

    def failing(which=None):
        return [acceptance.CriterionResult(1, "x", False, "forced")]
    monkeypatch.setattr(acceptance, "run_all", failing)
    assert main(["check"]) == 3


def test_deterministic_outputs(tmp_path, cfg_file):
    for d in ("a", "b"):
        main(["run", "--config", str(cfg_file), "--seed", "3", "--out", str(tmp_path / d)])
    for name in ("slots.csv", "frames.csv", "summary.json", "config.cfg"):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()

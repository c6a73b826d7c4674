"""
Tests for the qpush command line.
"""

import json
import sys
from pathlib import Path

# Add parent directory to path
sys.path.insert(0, str(Path(__file__).parent.parent.parent))

import pytest

from qpush import harness
from qpush.cli import main, parse_targets
from qpush.exceptions import ConfigInvalid
from qpush.schemas import CheckResult


def test_validate_command_passes(tmp_path, capsys):
    assert main(["validate", "--rounds", "100", "--out", str(tmp_path)]) == 0
    out = capsys.readouterr().out
    assert out.count("[OK]") == 14
    assert "[X]" not in out
    assert (tmp_path / "validate_g1_levels16_seed1.csv").exists()


def test_run_command_validate_mode_passes(tmp_path, capsys):
    assert main(["run", "--mode", "validate", "--rounds", "5", "--out", str(tmp_path)]) == 0
    assert "[X]" not in capsys.readouterr().out


@pytest.mark.parametrize("argv", [
    ["validate", "--rounds", "5"],
    ["run", "--mode", "validate", "--rounds", "5"],
])
def test_failed_check_sets_exit_code(monkeypatch, tmp_path, capsys, argv):
    failing = [CheckResult(name="gossip:g1:d1", passed=False, max_abs_diff=1.0, tolerance=1e-12)]
    monkeypatch.setattr(harness, "run_validation_suite", lambda rounds, seed: failing)
    assert main(argv + ["--out", str(tmp_path)]) == 1
    assert "[X] gossip:g1:d1" in capsys.readouterr().out


def test_run_command_writes_outputs(tmp_path, capsys):
    code = main([
        "run", "--graph", "ring:4", "--quant", "levels:8", "--dim", "3",
        "--rounds", "20", "--out", str(tmp_path), "--name", "small",
    ])
    assert code == 0
    assert (tmp_path / "small.csv").exists()
    assert (tmp_path / "small.meta.json").exists()
    assert "[OK] small" in capsys.readouterr().out


def test_run_command_config_file_with_override(tmp_path):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"graph": "ring:3", "dim": 2, "rounds": 10, "name": "from_file"}))
    assert main(["run", "--config", str(cfg), "--rounds", "12", "--out", str(tmp_path)]) == 0
    assert len((tmp_path / "from_file.csv").read_text().strip().splitlines()) == 13


def test_missing_config_returns_error_code(tmp_path, capsys):
    assert main(["run", "--config", str(tmp_path / "missing.json")]) == 2
    assert "[ERROR]" in capsys.readouterr().err


def test_compare_command(tmp_path, capsys):
    base = {"graph": "g1", "dim": 8, "rounds": 200}
    quantized = tmp_path / "q.json"
    exact = tmp_path / "e.json"
    quantized.write_text(json.dumps({**base, "quantizer": "levels:16"}))
    exact.write_text(json.dumps({**base, "quantizer": "identity"}))
    assert main(["compare", "--quantized", str(quantized), "--exact", str(exact), "--targets", "1e-1"]) == 0
    assert "reached" in capsys.readouterr().out


def test_parse_targets():
    assert parse_targets("1e-1, 1e-2,") == [0.1, 0.01]
    with pytest.raises(ConfigInvalid):
        parse_targets("1e-1,abc")

"""
Tests for the experiment harness: config loading, trace output, determinism,
bits-to-error tables and rate fits.
"""

import json
import math
import sys
from pathlib import Path

# Add parent directory to path
sys.path.insert(0, str(Path(__file__).parent.parent.parent))

import numpy as np
import pandas as pd
import pytest

from qpush.consensus import GOSSIP_COLUMNS
from qpush.exceptions import ConfigInvalid, NonPositiveValues, OutputError
from qpush.harness import CHECK_COLUMNS, bits_to_error, load_config, rate_fit, run, write_outputs
from qpush.models import Mode
from qpush.schemas import ExperimentConfig, MetricsTrace, RunMetadata


def trace_of(values, column="max_err") -> MetricsTrace:
    records = [{"round": t + 1, column: float(v)} for t, v in enumerate(values)]
    return MetricsTrace(columns=["round", column], records=records, metadata=RunMetadata(config={}))


# ==================== CONFIG ====================

def test_load_config_applies_overrides(tmp_path):
    path = tmp_path / "cfg.json"
    path.write_text(json.dumps({"mode": "gossip", "dim": 4, "rounds": 50}))
    cfg = load_config(str(path), {"rounds": 10, "seed": None})
    assert cfg.mode == Mode.GOSSIP
    assert cfg.dim == 4
    assert cfg.rounds == 10
    assert cfg.seed == 1


def test_load_config_without_file_uses_defaults():
    cfg = load_config(None, {"graph": "ring:5"})
    assert cfg.graph == "ring:5"
    assert cfg.quantizer == "levels:16"


def test_load_config_missing_file(tmp_path):
    with pytest.raises(ConfigInvalid) as exc:
        load_config(str(tmp_path / "nope.json"))
    assert "config" in exc.value.errors


def test_load_config_bad_json(tmp_path):
    path = tmp_path / "cfg.json"
    path.write_text("{not json")
    with pytest.raises(ConfigInvalid):
        load_config(str(path))


def test_load_config_rejects_non_object(tmp_path):
    path = tmp_path / "cfg.json"
    path.write_text("[1, 2]")
    with pytest.raises(ConfigInvalid):
        load_config(str(path))


def test_load_config_reports_each_field():
    with pytest.raises(ConfigInvalid) as exc:
        load_config(None, {"dim": 0, "quantizer": "bits:3", "colour": "red"})
    assert {"dim", "quantizer", "colour"} <= set(exc.value.errors)


def test_convex_mode_needs_lsq_objective():
    with pytest.raises(ConfigInvalid) as exc:
        load_config(None, {"mode": "convex", "objective": "mlp:4:3"})
    assert "convex mode" in exc.value.detail


# ==================== RUNS ====================

def test_run_writes_trace_and_metadata(tmp_path):
    cfg = ExperimentConfig(graph="g1", quantizer="levels:16", dim=64, rounds=500, output_dir=str(tmp_path))
    trace = run(cfg)
    csv_path = tmp_path / f"{cfg.run_name}.csv"
    meta_path = tmp_path / f"{cfg.run_name}.meta.json"
    frame = pd.read_csv(csv_path)
    assert list(frame.columns) == GOSSIP_COLUMNS
    assert len(frame) == 500
    assert frame["round"].tolist() == list(range(1, 501))
    assert frame["cum_bits"].iloc[-1] == 500 * trace.metadata.bits_per_round

    text = meta_path.read_text()
    meta = json.loads(text)
    assert text == json.dumps(meta, sort_keys=True, indent=2) + "\n"
    assert meta["n"] == 10
    assert meta["config"]["quantizer"] == "levels:16"


def test_run_without_write_leaves_no_files(tmp_path):
    cfg = ExperimentConfig(rounds=5, dim=2, output_dir=str(tmp_path / "out"))
    run(cfg, write=False)
    assert not (tmp_path / "out").exists()


def test_runs_are_byte_identical(tmp_path):
    cfg = ExperimentConfig(graph="g1", quantizer="levels:4", dim=8, rounds=100, seed=7,
                           output_dir=str(tmp_path), name="first")
    run(cfg)
    run(cfg.model_copy(update={"name": "second"}))
    assert (tmp_path / "first.csv").read_bytes() == (tmp_path / "second.csv").read_bytes()
    first = json.loads((tmp_path / "first.meta.json").read_text())
    second = json.loads((tmp_path / "second.meta.json").read_text())
    first["config"].pop("name")
    second["config"].pop("name")
    assert first == second


def test_write_outputs_reports_unwritable_dir(tmp_path):
    blocker = tmp_path / "file"
    blocker.write_text("x")
    trace = trace_of([1.0, 0.5])
    with pytest.raises(OutputError):
        write_outputs(trace, str(blocker), "run")


def test_validate_mode_trace():
    cfg = ExperimentConfig(mode="validate", rounds=100)
    trace = run(cfg, write=False)
    assert trace.columns == CHECK_COLUMNS
    assert len(trace.records) == 14
    assert all(r["passed"] for r in trace.records)
    assert trace.metadata.warnings == []


# ==================== BITS TO ERROR ====================

def test_bits_to_error_identical_runs():
    cfg = ExperimentConfig(graph="g1", quantizer="identity", dim=16, rounds=300)
    table = bits_to_error(cfg, cfg, [1e-1, 1e-2])
    assert table["status"].tolist() == ["reached", "reached"]
    assert table["bit_ratio"].tolist() == [1.0, 1.0]


def test_bits_to_error_unreachable_target():
    cfg = ExperimentConfig(graph="g1", quantizer="identity", dim=4, rounds=50)
    table = bits_to_error(cfg, cfg, [1e-30])
    row = table.iloc[0]
    assert row["status"] == "unreached"
    assert pd.isna(row["quantized_bits"])
    assert pd.isna(row["bit_ratio"])


def test_bits_to_error_zero_bits_is_undefined():
    # a single node never sends a message, so both runs hit the target at 0 bits
    cfg = ExperimentConfig(graph="ring:1", quantizer="identity", dim=3, rounds=5)
    table = bits_to_error(cfg, cfg, [1e-9], relative=False)
    row = table.iloc[0]
    assert row["status"] == "undefined"
    assert row["quantized_bits"] == 0
    assert pd.isna(row["bit_ratio"])


def test_quantization_saves_bits_at_high_dimension():
    quantized = ExperimentConfig(graph="g1", quantizer="levels:64", dim=1024, rounds=400)
    exact = quantized.model_copy(update={"quantizer": "identity"})
    table = bits_to_error(quantized, exact, [1e-2])
    assert table["status"].iloc[0] == "reached"
    assert table["bit_ratio"].iloc[0] >= 3.0


PRESETS = Path(__file__).parent.parent.parent / "experiments"
PRESET_PAIRS = ["gossip_g1", "gossip_g2", "gossip_g1_d1024", "convex", "nonconvex"]


@pytest.mark.parametrize("name", PRESET_PAIRS)
def test_preset_pairs_differ_only_in_quantizer(name):
    quantized = load_config(str(PRESETS / f"{name}.json"))
    exact = load_config(str(PRESETS / f"{name}_exact.json"))
    assert exact.quantizer == "identity"
    assert quantized.quantizer != "identity"
    assert quantized.model_dump(exclude={"quantizer"}) == exact.model_dump(exclude={"quantizer"})


def test_quantization_saves_bits_on_g2():
    quantized = load_config(str(PRESETS / "gossip_g2.json"))
    exact = load_config(str(PRESETS / "gossip_g2_exact.json"))
    row = bits_to_error(quantized, exact, [1e-1]).iloc[0]
    assert row["status"] == "reached"
    assert row["bit_ratio"] >= 3.0


def test_quantization_saves_bits_to_loss_convex():
    quantized = load_config(str(PRESETS / "convex.json"), {"rounds": 1024})
    exact = load_config(str(PRESETS / "convex_exact.json"), {"rounds": 1024})
    row = bits_to_error(quantized, exact, [1e-1]).iloc[0]
    assert row["status"] == "reached"
    assert row["bit_ratio"] >= 3.0


def test_bits_to_error_rejects_mismatched_configs():
    quantized = ExperimentConfig(quantizer="levels:16", dim=8, rounds=20)
    exact = ExperimentConfig(quantizer="identity", dim=16, rounds=20)
    with pytest.raises(ConfigInvalid) as exc:
        bits_to_error(quantized, exact, [1e-1])
    assert list(exc.value.errors) == ["dim"]


def test_bits_to_error_needs_targets():
    cfg = ExperimentConfig(dim=2, rounds=5)
    with pytest.raises(ConfigInvalid):
        bits_to_error(cfg, cfg, [])


# ==================== RATE FIT ====================

def test_rate_fit_exact_geometric():
    fit = rate_fit(trace_of([2.0 ** -t for t in range(1, 41)]), "max_err")
    assert fit.slope == pytest.approx(-math.log(2), rel=1e-10)
    assert fit.r_squared == pytest.approx(1.0)
    assert fit.rate == pytest.approx(0.5)
    assert not fit.degenerate


def test_rate_fit_window_is_inclusive():
    values = [1.0] * 10 + [2.0 ** -t for t in range(1, 11)]
    fit = rate_fit(trace_of(values), "max_err", window=(11, 20))
    assert fit.slope == pytest.approx(-math.log(2), rel=1e-10)


def test_rate_fit_constant_is_degenerate():
    fit = rate_fit(trace_of([3.0] * 10), "max_err")
    assert fit.degenerate
    assert fit.slope == 0.0
    assert fit.r_squared == 0.0


@pytest.mark.parametrize("value", [0.1, 3.0, 1e-7])
def test_rate_fit_constant_window_is_degenerate(value):
    fit = rate_fit(trace_of([1.0] * 5 + [value] * 30), "max_err", window=(6, 35))
    assert fit.degenerate
    assert fit.intercept == pytest.approx(math.log(value))


def test_rate_fit_single_point_is_degenerate():
    assert rate_fit(trace_of([1.0, 0.5]), "max_err", window=(2, 2)).degenerate


def test_rate_fit_rejects_non_positive():
    with pytest.raises(NonPositiveValues):
        rate_fit(trace_of([1.0, 0.0, 0.5]), "max_err")


def test_rate_fit_tracks_spectral_rate():
    trace = run(ExperimentConfig(graph="g1", quantizer="identity", dim=8, rounds=600), write=False)
    errors = trace.column("max_err")
    below = np.flatnonzero(errors < 1e-10)
    stop = int(below[0]) if below.size else len(errors)
    fit = rate_fit(trace, "max_err", window=(20, stop))
    assert fit.slope <= math.log(trace.metadata.spectral_profile.lambda_est) + 0.05
    assert fit.r_squared > 0.9

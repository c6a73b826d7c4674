"""
Experiment harness: config loading, run dispatch, trace output, bits-to-error
comparison and convergence-rate fitting.
"""

import json
import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Dict, Optional, Sequence, Tuple

import numpy as np
import pandas as pd
from pydantic import ValidationError

from qpush.consensus import run_gossip
from qpush.exceptions import ConfigInvalid, NonPositiveValues, OutputError
from qpush.models import Mode
from qpush.optimizer import run_optimization
from qpush.oracle import run_validation_suite
from qpush.schemas import ExperimentConfig, MetricsTrace, RunMetadata

logger = logging.getLogger(__name__)

CHECK_COLUMNS = ["name", "passed", "max_abs_diff", "tolerance"]
ERROR_COLUMN = {Mode.GOSSIP: "max_err", Mode.CONVEX: "gap_node1_avg", Mode.NONCONVEX: "gap_node1_avg"}
# Keys that may differ between the two sides of a bits-to-error comparison
COMPARE_FREE_KEYS = {"quantizer", "name", "output_dir"}


def config_errors(exc: ValidationError) -> Dict[str, str]:
    errors = {}
    for err in exc.errors():
        field = ".".join(str(p) for p in err["loc"]) or "config"
        errors[field] = err["msg"]
    return errors


def build_config(data: Dict[str, Any]) -> ExperimentConfig:
    try:
        return ExperimentConfig(**data)
    except ValidationError as e:
        raise ConfigInvalid(config_errors(e))


def load_config(path: Optional[str] = None, overrides: Optional[Dict[str, Any]] = None) -> ExperimentConfig:
    """Read a flat JSON config file and apply non-None overrides key by key."""
    data: Dict[str, Any] = {}
    if path:
        file_path = Path(path)
        if not file_path.is_file():
            raise ConfigInvalid({"config": f"file not found: {path}"})
        try:
            data = json.loads(file_path.read_text(encoding="utf-8"))
        except json.JSONDecodeError as e:
            raise ConfigInvalid({"config": f"{path} is not valid JSON ({e.msg})"})
        if not isinstance(data, dict):
            raise ConfigInvalid({"config": f"{path} must hold a flat JSON object"})
    for key, value in (overrides or {}).items():
        if value is not None:
            data[key] = value
    return build_config(data)


# ==================== RUNS ====================

def validation_trace(cfg: ExperimentConfig) -> MetricsTrace:
    checks = run_validation_suite(cfg.rounds, cfg.seed)
    failed = [c.name for c in checks if not c.passed]
    metadata = RunMetadata(
        config=cfg.model_dump(mode="json"),
        warnings=[f"check failed: {name}" for name in failed],
    )
    return MetricsTrace(
        columns=CHECK_COLUMNS,
        records=[c.model_dump() for c in checks],
        metadata=metadata,
    )


def execute(cfg: ExperimentConfig) -> MetricsTrace:
    if cfg.mode == Mode.GOSSIP:
        return run_gossip(cfg)
    if cfg.mode == Mode.VALIDATE:
        return validation_trace(cfg)
    return run_optimization(cfg)


def write_outputs(trace: MetricsTrace, output_dir: str, name: str) -> Tuple[Path, Path]:
    """Write ``<name>.csv`` and ``<name>.meta.json`` (sorted keys, no timestamps)."""
    out = Path(output_dir)
    csv_path = out / f"{name}.csv"
    meta_path = out / f"{name}.meta.json"
    try:
        out.mkdir(parents=True, exist_ok=True)
        trace.to_frame().to_csv(csv_path, index=False)
        meta = trace.metadata.model_dump(mode="json")
        meta_path.write_text(json.dumps(meta, sort_keys=True, indent=2) + "\n", encoding="utf-8")
    except OSError as e:
        raise OutputError(f"Could not write run outputs to {out}: {e}")
    return csv_path, meta_path


def run(cfg: ExperimentConfig, write: bool = True) -> MetricsTrace:
    logger.info("[HARNESS] running %s", cfg.run_name)
    trace = execute(cfg)
    if write:
        csv_path, _ = write_outputs(trace, cfg.output_dir, cfg.run_name)
        logger.info("[HARNESS] wrote %s", csv_path)
    return trace


# ==================== BITS TO ERROR ====================

def first_reach(trace: MetricsTrace, column: str, threshold: float) -> Optional[int]:
    """Cumulative bits at the first round whose error is <= threshold."""
    errors = trace.column(column)
    hits = np.flatnonzero(errors <= threshold)
    if hits.size == 0:
        return None
    return int(trace.records[int(hits[0])]["cum_bits"])


def bits_to_error(
    quantized_cfg: ExperimentConfig,
    exact_cfg: ExperimentConfig,
    targets: Sequence[float],
    relative: bool = True,
) -> pd.DataFrame:
    """
    Bits each run needs to first reach every target error.

    With ``relative`` the targets are fractions of the run's initial error.
    The two configs must agree on everything but the quantizer.
    """
    if quantized_cfg.mode == Mode.VALIDATE:
        raise ConfigInvalid({"mode": "bits-to-error needs a gossip or optimization mode"})
    left = quantized_cfg.model_dump(exclude=COMPARE_FREE_KEYS)
    right = exact_cfg.model_dump(exclude=COMPARE_FREE_KEYS)
    mismatched = sorted(k for k in left if left[k] != right[k])
    if mismatched:
        raise ConfigInvalid({k: "must match between quantized and exact configs" for k in mismatched})
    if not targets:
        raise ConfigInvalid({"targets": "at least one target error is required"})

    column = ERROR_COLUMN[quantized_cfg.mode]
    q_trace, e_trace = execute(quantized_cfg), execute(exact_cfg)
    rows = []
    for target in targets:
        q_bits = first_reach(q_trace, column, target * (q_trace.metadata.initial_error if relative else 1.0))
        e_bits = first_reach(e_trace, column, target * (e_trace.metadata.initial_error if relative else 1.0))
        if q_bits is None or e_bits is None:
            status = "unreached"
        elif q_bits == 0:
            # target already met before any message was sent
            status = "undefined"
        else:
            status = "reached"
        rows.append({
            "target_error": float(target),
            "quantized_bits": q_bits,
            "exact_bits": e_bits,
            "bit_ratio": e_bits / q_bits if status == "reached" else None,
            "status": status,
        })
    table = pd.DataFrame(rows, columns=["target_error", "quantized_bits", "exact_bits", "bit_ratio", "status"])
    table["quantized_bits"] = table["quantized_bits"].astype("Int64")
    table["exact_bits"] = table["exact_bits"].astype("Int64")
    logger.info("[HARNESS] bits-to-error:\n%s", table.to_string(index=False))
    return table


# ==================== RATE FIT ====================

@dataclass
class RateFit:
    slope: float
    intercept: float
    r_squared: float
    degenerate: bool

    @property
    def rate(self) -> float:
        """Per-round contraction factor exp(slope)."""
        return float(np.exp(self.slope))


def rate_fit(
    trace: MetricsTrace,
    column: str,
    window: Optional[Tuple[int, int]] = None,
) -> RateFit:
    """Least-squares fit of log(column) against round over ``window`` (inclusive rounds)."""
    rounds = trace.column("round")
    values = trace.column(column)
    if window is not None:
        start, stop = window
        keep = (rounds >= start) & (rounds <= stop)
        rounds, values = rounds[keep], values[keep]
    if np.any(values <= 0):
        raise NonPositiveValues(f"Column '{column}' has non-positive values in the fit window")
    if values.size < 2:
        return RateFit(slope=0.0, intercept=0.0, r_squared=0.0, degenerate=True)

    logs = np.log(values)
    if np.ptp(logs) == 0.0:
        return RateFit(slope=0.0, intercept=float(logs[0]), r_squared=0.0, degenerate=True)
    slope, intercept = np.polyfit(rounds, logs, 1)
    ss_tot = float(np.sum((logs - logs.mean()) ** 2))
    ss_res = float(np.sum((logs - (slope * rounds + intercept)) ** 2))
    return RateFit(
        slope=float(slope),
        intercept=float(intercept),
        r_squared=1.0 - ss_res / ss_tot,
        degenerate=False,
    )

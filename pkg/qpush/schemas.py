import re
from typing import Any, Dict, List, Optional

import numpy as np
import pandas as pd
from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

from qpush.config import settings
from qpush.exceptions import InvalidGraph
from qpush.graph import SpectralProfile, TheoryBounds, parse_graph_preset
from qpush.models import GradientPoint, Mode

LSQ_PRESET = re.compile(r"^lsq:(\d+)x(\d+):(\d+)$")
MLP_PRESET = re.compile(r"^mlp:(\d+):(\d+)$")
QUANT_PRESET = re.compile(r"^(identity|levels:\d+)$")


# ==================== EXPERIMENT CONFIG ====================

class ExperimentConfig(BaseModel):
    model_config = ConfigDict(extra="forbid", use_enum_values=False)

    mode: Mode = Mode.GOSSIP
    graph: str = "g1"
    quantizer: str = "levels:16"
    dim: int = Field(default=64, ge=1, le=settings.MAX_DIM)
    rounds: int = Field(default=500, ge=1, le=settings.MAX_ROUNDS)
    seed: int = Field(default_factory=lambda: settings.DEFAULT_SEED, ge=0)
    alpha: Optional[float] = Field(default=None, gt=0)
    alpha_decay: bool = False
    init: str = "uniform01"
    objective: Optional[str] = None
    batch_size: int = Field(default=1, ge=1)
    output_dir: str = Field(default_factory=lambda: settings.OUTPUT_DIR)
    name: Optional[str] = None
    enforce_admissibility: bool = True
    audit_interval: int = Field(default_factory=lambda: settings.AUDIT_INTERVAL, ge=0)
    norm_bits: int = Field(default_factory=lambda: settings.NORM_BITS, ge=1)
    scalar_bits: int = Field(default_factory=lambda: settings.SCALAR_BITS, ge=1)
    gradient_at: GradientPoint = GradientPoint.Z
    spectral_horizon: int = Field(
        default_factory=lambda: settings.SPECTRAL_HORIZON, ge=2, le=settings.MAX_SPECTRAL_HORIZON
    )

    @field_validator("graph")
    @classmethod
    def _graph_preset(cls, v: str) -> str:
        try:
            parse_graph_preset(v)
        except InvalidGraph as e:
            raise ValueError(e.detail)
        return v.strip()

    @field_validator("quantizer")
    @classmethod
    def _quantizer_preset(cls, v: str) -> str:
        v = v.strip().lower()
        if not QUANT_PRESET.match(v):
            raise ValueError(f"'{v}' is not 'identity' or 'levels:<s>'")
        return v

    @field_validator("init")
    @classmethod
    def _init_distribution(cls, v: str) -> str:
        if v not in ("uniform01", "gaussian"):
            raise ValueError("init must be 'uniform01' or 'gaussian'")
        return v

    @field_validator("objective")
    @classmethod
    def _objective_preset(cls, v: Optional[str]) -> Optional[str]:
        if v is None:
            return v
        v = v.strip().lower()
        match = LSQ_PRESET.match(v) or MLP_PRESET.match(v)
        if not match:
            raise ValueError(f"'{v}' is not 'lsq:<n>x<m>:<d>' or 'mlp:<hidden>:<d>'")
        if any(int(size) > settings.MAX_DIM for size in match.groups()):
            raise ValueError(f"'{v}' has a size above the limit of {settings.MAX_DIM}")
        return v

    @model_validator(mode="after")
    def _objective_matches_mode(self):
        if self.mode == Mode.CONVEX:
            if self.objective is None or not self.objective.startswith("lsq:"):
                raise ValueError("convex mode needs an 'lsq:<n>x<m>:<d>' objective")
        if self.mode == Mode.NONCONVEX:
            if self.objective is None or not self.objective.startswith("mlp:"):
                raise ValueError("nonconvex mode needs an 'mlp:<hidden>:<d>' objective")
        return self

    @property
    def run_name(self) -> str:
        if self.name:
            return self.name
        graph = re.sub(r"[^A-Za-z0-9]+", "-", self.graph).strip("-")
        quant = self.quantizer.replace(":", "")
        return f"{self.mode.value}_{graph}_{quant}_seed{self.seed}"


# ==================== TRACE ====================

class ObjectiveConstants(BaseModel):
    L: float
    d_sq: float
    sigma_sq: float
    estimated: bool = False


class RunMetadata(BaseModel):
    config: Dict[str, Any]
    n: Optional[int] = None
    arcs: Optional[int] = None
    dimension: Optional[int] = None
    message_bits: Optional[int] = None
    bits_per_round: Optional[int] = None
    omega: Optional[float] = None
    spectral_profile: Optional[SpectralProfile] = None
    theory_bounds: Optional[TheoryBounds] = None
    admissible: Optional[bool] = None
    warnings: List[str] = []
    alpha: Optional[float] = None
    objective_constants: Optional[ObjectiveConstants] = None
    initial_error: Optional[float] = None
    x1_norm: Optional[float] = None
    optimal_value: Optional[float] = None
    error_bound_final: Optional[float] = None


class MetricsTrace(BaseModel):
    columns: List[str]
    records: List[Dict[str, Any]] = []
    metadata: RunMetadata

    def column(self, name: str) -> np.ndarray:
        if name not in self.columns:
            raise KeyError(f"Trace has no column '{name}'; available: {self.columns}")
        return np.asarray([r[name] for r in self.records], dtype=np.float64)

    def to_frame(self):
        return pd.DataFrame.from_records(self.records, columns=self.columns)


class CheckResult(BaseModel):
    name: str
    passed: bool
    max_abs_diff: float
    tolerance: float


# ==================== API PAYLOADS ====================

class CompareRequest(BaseModel):
    quantized: ExperimentConfig
    exact: ExperimentConfig
    targets: List[float] = [1e-1, 1e-2, 1e-3]


class CompareRow(BaseModel):
    target_error: float
    quantized_bits: Optional[int] = None
    exact_bits: Optional[int] = None
    bit_ratio: Optional[float] = None
    status: str


class RunResponse(BaseModel):
    metadata: RunMetadata
    columns: List[str]
    records: List[Dict[str, Any]]


class ValidateResponse(BaseModel):
    passed: bool
    checks: List[CheckResult]

"""
Unbiased stochastic low-precision quantizer and transmitted-bit accounting.

A vector x is sent as its norm, one sign per entry and one integer level in
[0, s] per entry. Entry i is reconstructed as ||x|| * sign(x_i) * level_i / s,
where level_i is |x_i| / ||x|| * s rounded up or down at random so that the
reconstruction is unbiased.
"""

import enum
import math
from dataclasses import dataclass
from typing import Optional, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, model_validator

from qpush.config import settings
from qpush.exceptions import ConfigInvalid, MalformedMessage


class QuantizerKind(str, enum.Enum):
    IDENTITY = "identity"
    STOCHASTIC_LEVELS = "stochastic_levels"


class QuantizerSpec(BaseModel):
    model_config = ConfigDict(frozen=True)

    kind: QuantizerKind = QuantizerKind.STOCHASTIC_LEVELS
    s: int = Field(default=16, ge=1)
    norm_bits: int = Field(default_factory=lambda: settings.NORM_BITS, ge=1)
    scalar_bits: int = Field(default_factory=lambda: settings.SCALAR_BITS, ge=1)

    @model_validator(mode="after")
    def _levels_power_of_two(self):
        if self.kind == QuantizerKind.STOCHASTIC_LEVELS and self.s & (self.s - 1):
            raise ValueError(f"level count s={self.s} must be a power of two")
        return self

    @property
    def entry_bits(self) -> int:
        return int(math.log2(self.s)) + 1

    @property
    def is_identity(self) -> bool:
        return self.kind == QuantizerKind.IDENTITY

    @property
    def label(self) -> str:
        return "identity" if self.is_identity else f"levels:{self.s}"

    @classmethod
    def from_preset(
        cls,
        preset: str,
        norm_bits: Optional[int] = None,
        scalar_bits: Optional[int] = None,
    ) -> "QuantizerSpec":
        """Parse "identity" or "levels:<s>"."""
        overrides = {}
        if norm_bits is not None:
            overrides["norm_bits"] = norm_bits
        if scalar_bits is not None:
            overrides["scalar_bits"] = scalar_bits
        text = preset.strip().lower()
        if text == "identity":
            return cls(kind=QuantizerKind.IDENTITY, s=1, **overrides)
        kind, _, arg = text.partition(":")
        if kind != "levels" or not arg.isdigit():
            raise ConfigInvalid({"quantizer": f"'{preset}' is not 'identity' or 'levels:<s>'"})
        try:
            return cls(kind=QuantizerKind.STOCHASTIC_LEVELS, s=int(arg), **overrides)
        except ValueError as e:
            raise ConfigInvalid({"quantizer": str(e)})


@dataclass(frozen=True)
class QuantizedMessage:
    norm: float
    signs: np.ndarray
    levels: np.ndarray
    y: float = 1.0
    # Only set for the identity kind
    raw: Optional[np.ndarray] = None

    @property
    def dim(self) -> int:
        return len(self.raw) if self.raw is not None else self.levels.shape[-1]


def quantize(
    x: np.ndarray,
    spec: QuantizerSpec,
    rng: np.random.Generator,
    y: float = 1.0,
    draws: Optional[int] = None,
) -> QuantizedMessage:
    """
    Encode ``x`` as (norm, signs, levels).

    With ``draws`` the levels hold that many independent roundings of the same
    vector, one per row; row k matches the k-th of ``draws`` sequential calls.
    """
    x = np.asarray(x, dtype=np.float64)
    d = x.shape[0]
    if spec.is_identity:
        return QuantizedMessage(
            norm=float(np.linalg.norm(x)),
            signs=np.sign(x).astype(np.int8),
            levels=np.zeros(d, dtype=np.int64),
            y=y,
            raw=x.copy(),
        )

    norm = float(np.linalg.norm(x))
    if norm == 0.0:
        return QuantizedMessage(
            norm=0.0,
            signs=np.zeros(d, dtype=np.int8),
            levels=np.zeros(d, dtype=np.int64),
            y=y,
        )

    ratio = np.abs(x) / norm * spec.s
    lower = np.minimum(np.floor(ratio), spec.s)
    prob_up = np.clip(ratio - lower, 0.0, 1.0)
    u = rng.random(d if draws is None else (draws, d))
    levels = lower.astype(np.int64) + (u < prob_up)
    return QuantizedMessage(
        norm=norm,
        signs=np.sign(x).astype(np.int8),
        levels=levels,
        y=y,
    )


def dequantize(m: QuantizedMessage, spec: QuantizerSpec) -> np.ndarray:
    if spec.is_identity:
        if m.raw is None:
            raise MalformedMessage("Identity-quantizer message carries no raw vector")
        return m.raw.copy()
    if m.norm < 0:
        raise MalformedMessage(f"Message norm must be non-negative, got {m.norm}")
    if m.levels.size and (m.levels.max() > spec.s or m.levels.min() < 0):
        raise MalformedMessage(
            f"Message levels must lie in [0, {spec.s}], got range "
            f"[{m.levels.min()}, {m.levels.max()}]"
        )
    return m.norm * m.signs * (m.levels / spec.s)


def omega_sq(d: int, spec: QuantizerSpec) -> float:
    if spec.is_identity:
        return 0.0
    return min(d / spec.s ** 2, math.sqrt(d) / spec.s)


def message_bits(d: int, spec: QuantizerSpec) -> int:
    """Bits one node sends to one out-neighbour per round."""
    if spec.is_identity:
        return d * spec.norm_bits + spec.scalar_bits
    return d * spec.entry_bits + spec.norm_bits + spec.scalar_bits


def empirical_moments(
    x: np.ndarray,
    spec: QuantizerSpec,
    rng: np.random.Generator,
    draws: int,
    chunk: int = 10_000,
) -> Tuple[np.ndarray, np.ndarray, float]:
    """
    Monte-Carlo moments of Q(x) over ``draws`` independent quantizations.

    Returns (per-coordinate mean, per-coordinate std, mean of ||Q(x) - x||^2).
    Draws go through quantize/dequantize in chunks so large dimensions stay in memory.
    """
    x = np.asarray(x, dtype=np.float64)
    d = x.shape[0]
    total = np.zeros(d)
    total_sq = np.zeros(d)
    err_sq = 0.0
    done = 0
    while done < draws:
        size = min(chunk, draws - done)
        # identity and zero messages decode to a single row
        decoded = dequantize(quantize(x, spec, rng, draws=size), spec)
        samples = np.broadcast_to(decoded, (size, d))
        total += samples.sum(axis=0)
        total_sq += (samples ** 2).sum(axis=0)
        err_sq += float(((samples - x) ** 2).sum())
        done += size
    mean = total / draws
    var = np.maximum(total_sq / draws - mean ** 2, 0.0)
    return mean, np.sqrt(var), err_sq / draws

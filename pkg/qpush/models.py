from dataclasses import dataclass
from typing import Dict
import enum

import numpy as np


class Mode(str, enum.Enum):
    GOSSIP = "gossip"
    CONVEX = "convex"
    NONCONVEX = "nonconvex"
    VALIDATE = "validate"


class GradientPoint(str, enum.Enum):
    Z = "z"  # push-sum corrected value w / y
    W = "w"  # uncorrected value, ablation only


@dataclass
class PushSumNodeState:
    """State one node keeps between rounds."""

    x: np.ndarray
    x_hat_self: np.ndarray
    # Replica of x_hat_j for every in-neighbour j (self-loop excluded)
    x_hat_in: Dict[int, np.ndarray]
    y: float
    z: np.ndarray

    @property
    def dim(self) -> int:
        return self.x.shape[0]


@dataclass
class GossipNodeState(PushSumNodeState):
    pass


@dataclass
class OptNodeState(PushSumNodeState):
    w: np.ndarray = None
    z_time_avg: np.ndarray = None
    rounds: int = 0
    # Last stochastic gradient applied to x
    grad: np.ndarray = None


@dataclass
class MatrixState:
    """Stacked network state used by the matrix-form recursions."""

    X: np.ndarray
    X_hat: np.ndarray
    W: np.ndarray
    y: np.ndarray
    t: int = 1

    @property
    def Z(self) -> np.ndarray:
        return self.W / self.y[:, None]

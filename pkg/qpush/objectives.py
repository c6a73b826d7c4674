"""
Local objectives f_i with stochastic gradients.

Two families are provided: a least-squares objective (convex, constants known in
closed form) and a two-layer sigmoid network with squared-error loss
(non-convex, constants estimated by sampling).
"""

import logging
from abc import ABC, abstractmethod
from typing import List, Optional, Sequence, Tuple

import numpy as np

from qpush.exceptions import ConfigInvalid, DimensionMismatch, EmptyDataset
from qpush.schemas import LSQ_PRESET, MLP_PRESET, ObjectiveConstants
from qpush.utils.seeding import Purpose, SeedStreams

logger = logging.getLogger(__name__)

MLP_CLASSES = 3
MLP_SAMPLES_PER_NODE = 100


class Objective(ABC):
    """Local function f_i and its stochastic gradient oracle."""

    dim: int
    batch_size: int = 1

    @abstractmethod
    def loss(self, x: np.ndarray) -> float: ...

    @abstractmethod
    def full_gradient(self, x: np.ndarray) -> np.ndarray: ...

    @abstractmethod
    def sample_gradient(self, x: np.ndarray, rng: np.random.Generator) -> np.ndarray: ...

    @property
    def optimum(self) -> Optional[np.ndarray]:
        return None

    @property
    def optimal_value(self) -> Optional[float]:
        return None

    def constants(self, points: Sequence[np.ndarray] = ()) -> Optional[ObjectiveConstants]:
        return None

    def empirical_variance(self, x: np.ndarray, rng: np.random.Generator, draws: int = 1000) -> float:
        """Mean of ||sample_gradient - full_gradient||^2 over ``draws`` samples."""
        full = self.full_gradient(x)
        total = 0.0
        for _ in range(draws):
            total += float(np.sum((self.sample_gradient(x, rng) - full) ** 2))
        return total / draws

    def second_moment(self, x: np.ndarray, rng: np.random.Generator, draws: int = 1000) -> float:
        total = 0.0
        for _ in range(draws):
            total += float(np.sum(self.sample_gradient(x, rng) ** 2))
        return total / draws


# ==================== LEAST SQUARES ====================

class LeastSquaresObjective(Objective):
    """f_i(x) = (h / 2m) sum_j ||x - zeta_j||^2 with curvature h."""

    def __init__(self, local_data: np.ndarray, curvature: float = 1.0, batch_size: int = 1):
        data = np.atleast_2d(np.asarray(local_data, dtype=np.float64))
        if data.shape[0] == 0 or data.size == 0:
            raise EmptyDataset("Least-squares objective needs at least one data point")
        self.data = data
        self.m, self.dim = data.shape
        self.curvature = float(curvature)
        self.batch_size = batch_size
        self.mean = data.mean(axis=0)

    def loss(self, x: np.ndarray) -> float:
        return 0.5 * self.curvature * float(np.mean(np.sum((x - self.data) ** 2, axis=1)))

    def full_gradient(self, x: np.ndarray) -> np.ndarray:
        return self.curvature * (x - self.mean)

    def sample_gradient(self, x: np.ndarray, rng: np.random.Generator) -> np.ndarray:
        idx = rng.integers(0, self.m, size=self.batch_size)
        return self.curvature * (x - self.data[idx].mean(axis=0))

    @property
    def optimum(self) -> np.ndarray:
        return self.mean

    @property
    def optimal_value(self) -> float:
        return self.loss(self.mean)

    @property
    def sample_variance(self) -> float:
        """Variance of a single-sample gradient (independent of x)."""
        spread = float(np.mean(np.sum((self.data - self.mean) ** 2, axis=1)))
        return self.curvature ** 2 * spread / self.batch_size

    def gradient_second_moment(self, x: np.ndarray) -> float:
        return float(np.sum(self.full_gradient(x) ** 2)) + self.sample_variance

    def constants(self, points: Sequence[np.ndarray] = ()) -> ObjectiveConstants:
        """D^2 is the largest gradient second moment over the local optimum and ``points``."""
        return ObjectiveConstants(
            L=self.curvature,
            d_sq=max(self.gradient_second_moment(x) for x in [self.mean, *points]),
            sigma_sq=self.sample_variance,
        )


def least_squares_objective(
    local_data: np.ndarray,
    curvature: float = 1.0,
    batch_size: int = 1,
) -> LeastSquaresObjective:
    return LeastSquaresObjective(local_data, curvature=curvature, batch_size=batch_size)


# ==================== SIGMOID NETWORK ====================

def sigmoid(a: np.ndarray) -> np.ndarray:
    return 0.5 * (1.0 + np.tanh(0.5 * a))


class MLPObjective(Objective):
    """
    Two-layer network u -> W2 sigmoid(W1 u + b1) + b2 with loss 0.5 ||out - target||^2
    averaged over samples.

    The optimisation variable is an offset from a fixed reference point, so that
    x = 0 corresponds to ``reference`` (all zeros unless given).
    Parameter layout: W1 (h x d_in), b1 (h), W2 (k x h), b2 (k), row-major.
    """

    def __init__(
        self,
        inputs: np.ndarray,
        targets: np.ndarray,
        hidden_units: int,
        batch_size: int = 1,
        reference: Optional[np.ndarray] = None,
    ):
        if hidden_units < 1:
            raise ConfigInvalid({"objective": f"hidden units must be >= 1, got {hidden_units}"})
        self.inputs = np.atleast_2d(np.asarray(inputs, dtype=np.float64))
        self.targets = np.asarray(targets, dtype=np.float64).reshape(self.inputs.shape[0], -1)
        if self.inputs.shape[0] == 0:
            raise EmptyDataset("Network objective needs at least one sample")
        self.m, self.d_in = self.inputs.shape
        self.k = self.targets.shape[1]
        self.h = hidden_units
        self.batch_size = batch_size
        self.shapes = [(self.h, self.d_in), (self.h,), (self.k, self.h), (self.k,)]
        self.dim = sum(int(np.prod(s)) for s in self.shapes)
        if reference is None:
            reference = np.zeros(self.dim)
        if reference.shape != (self.dim,):
            raise DimensionMismatch(f"Reference parameters have shape {reference.shape}, expected ({self.dim},)")
        self.reference = np.asarray(reference, dtype=np.float64)
        self._L: Optional[float] = None
        self._estimates: Optional[ObjectiveConstants] = None

    def unpack(self, x: np.ndarray) -> List[np.ndarray]:
        theta = self.reference + x
        parts, start = [], 0
        for shape in self.shapes:
            size = int(np.prod(shape))
            parts.append(theta[start:start + size].reshape(shape))
            start += size
        return parts

    def _loss_and_gradient(self, x: np.ndarray, U: np.ndarray, Y: np.ndarray) -> Tuple[float, np.ndarray]:
        W1, b1, W2, b2 = self.unpack(x)
        batch = U.shape[0]
        H = sigmoid(U @ W1.T + b1)
        E = H @ W2.T + b2 - Y
        loss = 0.5 * float(np.sum(E ** 2)) / batch
        g_W2 = E.T @ H / batch
        g_b2 = E.mean(axis=0)
        delta = (E @ W2) * H * (1.0 - H)
        g_W1 = delta.T @ U / batch
        g_b1 = delta.mean(axis=0)
        grad = np.concatenate([g_W1.ravel(), g_b1, g_W2.ravel(), g_b2])
        return loss, grad

    def loss(self, x: np.ndarray) -> float:
        return self._loss_and_gradient(x, self.inputs, self.targets)[0]

    def full_gradient(self, x: np.ndarray) -> np.ndarray:
        return self._loss_and_gradient(x, self.inputs, self.targets)[1]

    def sample_gradient(self, x: np.ndarray, rng: np.random.Generator) -> np.ndarray:
        idx = rng.integers(0, self.m, size=self.batch_size)
        return self._loss_and_gradient(x, self.inputs[idx], self.targets[idx])[1]

    def set_estimates(self, constants: ObjectiveConstants) -> None:
        self._estimates = constants

    def constants(self, points: Sequence[np.ndarray] = ()) -> Optional[ObjectiveConstants]:
        return self._estimates


def nonconvex_objective(
    local_data: Tuple[np.ndarray, np.ndarray],
    hidden_units: int,
    batch_size: int = 1,
    reference: Optional[np.ndarray] = None,
) -> MLPObjective:
    inputs, targets = local_data
    return MLPObjective(inputs, targets, hidden_units, batch_size=batch_size, reference=reference)


# ==================== GLOBAL HELPERS ====================

def global_loss(objectives: Sequence[Objective], x: np.ndarray) -> float:
    return float(np.mean([obj.loss(x) for obj in objectives]))


def global_gradient(objectives: Sequence[Objective], x: np.ndarray) -> np.ndarray:
    return np.mean([obj.full_gradient(x) for obj in objectives], axis=0)


def global_optimum(objectives: Sequence[Objective]) -> Optional[np.ndarray]:
    """Minimiser of (1/n) sum f_i when it is known in closed form."""
    if not all(isinstance(obj, LeastSquaresObjective) for obj in objectives):
        return None
    weights = np.array([obj.curvature for obj in objectives])
    means = np.vstack([obj.mean for obj in objectives])
    return weights @ means / weights.sum()


def estimate_smoothness(
    objectives: Sequence[Objective],
    rng: np.random.Generator,
    points: int = 5,
    radius: float = 0.1,
    iterations: int = 30,
    eps: float = 1e-4,
) -> float:
    """
    Largest curvature of the global objective near the origin, by power
    iteration on finite-difference Hessian-vector products.
    """
    dim = objectives[0].dim
    best = 0.0
    for _ in range(points):
        x = radius * rng.standard_normal(dim)
        v = rng.standard_normal(dim)
        v /= np.linalg.norm(v)
        curvature = 0.0
        for _ in range(iterations):
            hv = (global_gradient(objectives, x + eps * v) - global_gradient(objectives, x - eps * v)) / (2 * eps)
            norm = float(np.linalg.norm(hv))
            if norm == 0.0:
                break
            curvature = norm
            v = hv / norm
        best = max(best, curvature)
    return best


# ==================== PRESETS ====================



def lsq_data(n: int, m: int, d: int, rng: np.random.Generator) -> Tuple[np.ndarray, List[np.ndarray]]:
    """zeta* ~ U[0, 100]^d and zeta_j^i = zeta* + N(0, I)."""
    center = rng.uniform(0.0, 100.0, size=d)
    return center, [center + rng.standard_normal((m, d)) for _ in range(n)]


def mlp_data(
    n: int,
    d_in: int,
    rng: np.random.Generator,
    samples: int = MLP_SAMPLES_PER_NODE,
    classes: int = MLP_CLASSES,
) -> List[Tuple[np.ndarray, np.ndarray]]:
    """Gaussian clusters on the unit sphere with one-hot targets."""
    centers = rng.standard_normal((classes, d_in))
    centers /= np.linalg.norm(centers, axis=1, keepdims=True)
    eye = np.eye(classes)
    local = []
    for _ in range(n):
        labels = rng.integers(0, classes, size=samples)
        inputs = centers[labels] + 0.3 / np.sqrt(d_in) * rng.standard_normal((samples, d_in))
        local.append((inputs, eye[labels]))
    return local


def build_objectives(preset: str, n: int, streams: SeedStreams, batch_size: int = 1) -> List[Objective]:
    rng = streams.global_stream(Purpose.DATA)
    match = LSQ_PRESET.match(preset)
    if match:
        nodes, m, d = (int(g) for g in match.groups())
        if nodes != n:
            raise ConfigInvalid({"objective": f"preset is for {nodes} nodes but the graph has {n}"})
        if m < 1:
            raise EmptyDataset("Least-squares preset needs m >= 1 samples per node")
        _, data = lsq_data(n, m, d, rng)
        return [least_squares_objective(local, batch_size=batch_size) for local in data]

    match = MLP_PRESET.match(preset)
    if match:
        hidden, d_in = (int(g) for g in match.groups())
        local = mlp_data(n, d_in, rng)
        # Seeded reference point: W1 ~ N(0, 1/d_in), W2 ~ N(0, 1/h), zero biases
        W1 = rng.standard_normal((hidden, d_in)) / np.sqrt(d_in)
        W2 = rng.standard_normal((MLP_CLASSES, hidden)) / np.sqrt(hidden)
        reference = np.concatenate([W1.ravel(), np.zeros(hidden), W2.ravel(), np.zeros(MLP_CLASSES)])
        objectives = [
            nonconvex_objective(data, hidden, batch_size=batch_size, reference=reference)
            for data in local
        ]
        attach_estimates(objectives, streams.global_stream(Purpose.DIAGNOSTIC))
        return objectives

    raise ConfigInvalid({"objective": f"unknown objective preset '{preset}'"})


def attach_estimates(objectives: Sequence[MLPObjective], rng: np.random.Generator, draws: int = 200) -> None:
    """Sampled L, D^2 and sigma^2 at the origin, flagged as estimates."""
    L = estimate_smoothness(objectives, rng)
    origin = np.zeros(objectives[0].dim)
    d_sq = max(obj.second_moment(origin, rng, draws) for obj in objectives)
    sigma_sq = max(obj.empirical_variance(origin, rng, draws) for obj in objectives)
    constants = ObjectiveConstants(L=L, d_sq=d_sq, sigma_sq=sigma_sq, estimated=True)
    for obj in objectives:
        obj.set_estimates(constants)
    logger.info("[SGD] estimated constants: L=%.4f D^2=%.4f sigma^2=%.4f", L, d_sq, sigma_sq)

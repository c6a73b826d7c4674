"""
Matrix-form reference recursions.

These step the whole network at once (X, X_hat, W are n x d) with their own
quantization code, reading the same keyed random streams as the per-node
engines, so both implementations can be checked against each other.
"""

import logging
from typing import List, Optional, Sequence, Tuple

import numpy as np

from qpush.config import settings
from qpush.consensus import gossip_round, init_gossip, stack_states
from qpush.exceptions import DimensionMismatch
from qpush.graph import ColumnStochasticMatrix, DirectedGraph, build_topology, out_degree_weight_matrix
from qpush.models import GradientPoint, MatrixState
from qpush.objectives import Objective, build_objectives
from qpush.optimizer import init_optimization, sgd_round
from qpush.quantizer import QuantizerSpec, message_bits
from qpush.schemas import CheckResult
from qpush.utils.seeding import Purpose, SeedStreams

logger = logging.getLogger(__name__)

EQUIVALENCE_TOL = 1e-12
CLOSED_FORM_TOL = 1e-10


def quantize_rows(D: np.ndarray, spec: QuantizerSpec, streams: SeedStreams, t: int) -> np.ndarray:
    """Quantize every row of D with node i's QUANTIZE stream for round t."""
    if spec.is_identity:
        return D.copy()
    d = D.shape[1]
    out = np.zeros_like(D)
    for i in range(D.shape[0]):
        row = D[i].copy()
        norm = float(np.linalg.norm(row))
        if norm == 0.0:
            continue
        u = streams.for_node(i, t, Purpose.QUANTIZE).random(d)
        scaled = np.abs(row) / norm * spec.s
        floor = np.minimum(np.floor(scaled), spec.s)
        level = floor + (u < scaled - floor)
        out[i] = norm * np.sign(row) * (level / spec.s)
    return out


def arc_count(A: ColumnStochasticMatrix) -> int:
    return int(np.count_nonzero(A.weights)) - A.n


def _mix(state: MatrixState, A: ColumnStochasticMatrix, spec: QuantizerSpec, streams: SeedStreams):
    X_hat = state.X_hat + quantize_rows(state.X - state.X_hat, spec, streams, state.t)
    W = np.empty_like(state.X)
    y = np.empty_like(state.y)
    # row i of A X_hat and A y, summed over nonzero a_ij in ascending j
    for i in range(A.n):
        cols = np.flatnonzero(A.weights[i])
        row = A.weights[i, cols[0]] * X_hat[cols[0]]
        y_i = A.weights[i, cols[0]] * state.y[cols[0]]
        for j in cols[1:]:
            row = row + A.weights[i, j] * X_hat[j]
            y_i = y_i + A.weights[i, j] * state.y[j]
        W[i] = (state.X[i] - X_hat[i]) + row
        y[i] = y_i
    bits = arc_count(A) * message_bits(state.X.shape[1], spec)
    return X_hat, W, y, bits


def matrix_gossip_step(
    state: MatrixState,
    A: ColumnStochasticMatrix,
    spec: QuantizerSpec,
    streams: SeedStreams,
) -> Tuple[MatrixState, int]:
    X_hat, W, y, bits = _mix(state, A, spec, streams)
    return MatrixState(X=W, X_hat=X_hat, W=W, y=y, t=state.t + 1), bits


def matrix_opt_step(
    state: MatrixState,
    A: ColumnStochasticMatrix,
    spec: QuantizerSpec,
    alpha: float,
    objectives: Sequence[Objective],
    streams: SeedStreams,
    gradient_at: GradientPoint = GradientPoint.Z,
) -> Tuple[MatrixState, int]:
    X_hat, W, y, bits = _mix(state, A, spec, streams)
    points = W / y[:, None] if gradient_at == GradientPoint.Z else W
    G = np.vstack([
        obj.sample_gradient(points[i], streams.for_node(i, state.t, Purpose.GRADIENT))
        for i, obj in enumerate(objectives)
    ])
    return MatrixState(X=W - alpha * G, X_hat=X_hat, W=W, y=y, t=state.t + 1), bits


def closed_form_pushsum(A: ColumnStochasticMatrix, X1: np.ndarray, t: int) -> np.ndarray:
    """Rows of A^t X(1) divided by A^t 1: the identity-quantizer z(t+1)."""
    if X1.shape[0] != A.n:
        raise DimensionMismatch(f"X(1) has {X1.shape[0]} rows for a {A.n}-node matrix")
    P = np.linalg.matrix_power(A.weights, t)
    return (P @ X1) / (P @ np.ones(A.n))[:, None]


# ==================== ENGINE COMPARISONS ====================

def compare_gossip_engines(
    graph: DirectedGraph,
    spec: QuantizerSpec,
    d: int,
    rounds: int,
    seed: int,
) -> CheckResult:
    A = out_degree_weight_matrix(graph)
    streams = SeedStreams(seed)
    X1 = streams.global_stream(Purpose.INIT).random((graph.n, d))
    states = init_gossip(graph, X1, d)
    mstate = MatrixState(X=X1.copy(), X_hat=np.zeros_like(X1), W=X1.copy(), y=np.ones(graph.n))

    worst = 0.0
    for t in range(1, rounds + 1):
        states, bits = gossip_round(states, A, spec, streams, t)
        mstate, mbits = matrix_gossip_step(mstate, A, spec, streams)
        if bits != mbits:
            worst = float("inf")
        X = stack_states(states)
        worst = max(
            worst,
            float(np.max(np.abs(X - mstate.X))),
            float(np.max(np.abs(stack_states(states, "x_hat_self") - mstate.X_hat))),
            float(np.max(np.abs(np.array([s.y for s in states]) - mstate.y))),
        )
    tol = EQUIVALENCE_TOL
    return CheckResult(
        name=f"gossip/{graph.name}/{spec.label}/d={d}",
        passed=worst <= tol,
        max_abs_diff=worst,
        tolerance=tol,
    )


def compare_opt_engines(
    graph: DirectedGraph,
    spec: QuantizerSpec,
    objectives: Sequence[Objective],
    alpha: float,
    rounds: int,
    seed: int,
    gradient_at: GradientPoint = GradientPoint.Z,
) -> CheckResult:
    A = out_degree_weight_matrix(graph)
    streams = SeedStreams(seed)
    d = objectives[0].dim
    states = init_optimization(graph, d)
    zeros = np.zeros((graph.n, d))
    mstate = MatrixState(X=zeros, X_hat=zeros.copy(), W=zeros.copy(), y=np.ones(graph.n))

    worst = 0.0
    for t in range(1, rounds + 1):
        states, _ = sgd_round(states, A, spec, alpha, objectives, streams, t, gradient_at=gradient_at)
        mstate, _ = matrix_opt_step(mstate, A, spec, alpha, objectives, streams, gradient_at=gradient_at)
        X = stack_states(states)
        worst = max(
            worst,
            float(np.max(np.abs(X - mstate.X))),
            float(np.max(np.abs(stack_states(states, "z") - mstate.Z))),
        )
    tol = EQUIVALENCE_TOL
    return CheckResult(
        name=f"sgd/{graph.name}/{spec.label}/d={d}",
        passed=worst <= tol,
        max_abs_diff=worst,
        tolerance=tol,
    )


def compare_closed_form(graph: DirectedGraph, d: int, rounds: int, seed: int) -> CheckResult:
    """Identity-quantizer gossip against A^t X(1) / A^t 1."""
    A = out_degree_weight_matrix(graph)
    spec = QuantizerSpec.from_preset("identity")
    streams = SeedStreams(seed)
    X1 = streams.global_stream(Purpose.INIT).random((graph.n, d))
    states = init_gossip(graph, X1, d)
    worst = 0.0
    for t in range(1, rounds + 1):
        states, _ = gossip_round(states, A, spec, streams, t)
        expected = closed_form_pushsum(A, X1, t)
        worst = max(worst, float(np.max(np.abs(stack_states(states, "z") - expected))))
    tol = CLOSED_FORM_TOL
    return CheckResult(
        name=f"closed-form/{graph.name}/d={d}",
        passed=worst <= tol,
        max_abs_diff=worst,
        tolerance=tol,
    )


# Graph presets of the validation grid, each with a least-squares preset of matching size
VALIDATION_GRAPHS = [("ring:3", "lsq:3x10:{d}"), ("g1", "lsq:10x10:{d}")]
VALIDATION_DIMS = [1, 8, 64]
VALIDATION_ALPHA = 0.01


def validation_quantizer(d: int) -> QuantizerSpec:
    return QuantizerSpec.from_preset("levels:16" if d > 8 else "levels:4")


def run_validation_suite(rounds: Optional[int] = None, seed: int = 1) -> List[CheckResult]:
    """Cross-check the per-node engines against the matrix form and closed form."""
    rounds = rounds or settings.VALIDATION_ROUNDS
    checks = []
    for preset, _ in VALIDATION_GRAPHS:
        checks.append(compare_closed_form(build_topology(preset), 8, rounds, seed))
    for preset, objective in VALIDATION_GRAPHS:
        graph = build_topology(preset)
        for d in VALIDATION_DIMS:
            spec = validation_quantizer(d)
            checks.append(compare_gossip_engines(graph, spec, d, rounds, seed))
            objectives = build_objectives(objective.format(d=d), graph.n, SeedStreams(seed))
            checks.append(compare_opt_engines(graph, spec, objectives, VALIDATION_ALPHA, rounds, seed))

    for check in checks:
        status = "OK" if check.passed else "FAIL"
        logger.info("[ORACLE] %-28s %s max_diff=%.3e tol=%.1e", check.name, status, check.max_abs_diff, check.tolerance)
    return checks

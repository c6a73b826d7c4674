"""
Quantized push-sum stochastic gradient descent.

Each round reuses the gossip mixing step, giving w_i; then z_i = w_i / y_i, a
stochastic gradient is taken at z_i and x_i = w_i - alpha * gradient.
"""

import logging
import math
from typing import List, Optional, Sequence, Tuple

import numpy as np

from qpush.config import settings
from qpush.consensus import (
    audit_replicas,
    prepare_network,
    quantized_mixing,
    safe_theory_bounds,
    stack_states,
)
from qpush.exceptions import DimensionMismatch
from qpush.graph import ColumnStochasticMatrix, DirectedGraph
from qpush.models import GradientPoint, Mode, OptNodeState
from qpush.objectives import Objective, build_objectives, global_gradient, global_loss, global_optimum
from qpush.quantizer import QuantizerSpec, message_bits, omega_sq
from qpush.schemas import ExperimentConfig, MetricsTrace, ObjectiveConstants, RunMetadata
from qpush.utils.seeding import Purpose, SeedStreams

logger = logging.getLogger(__name__)

OPT_COLUMNS = [
    "round",
    "gap_node1_avg",
    "cons_err_max",
    "grad_norm_sq",
    "residual_u",
    "cum_bits",
    "gap_max_avg",
]


def init_optimization(g: DirectedGraph, d: int) -> List[OptNodeState]:
    """x = x_hat = w = z = 0 and y = 1 on every node."""
    return [
        OptNodeState(
            x=np.zeros(d),
            x_hat_self=np.zeros(d),
            x_hat_in={j: np.zeros(d) for j in g.in_neighbors(i)},
            y=1.0,
            z=np.zeros(d),
            w=np.zeros(d),
            z_time_avg=np.zeros(d),
        )
        for i in range(g.n)
    ]


def sgd_round(
    states: Sequence[OptNodeState],
    A: ColumnStochasticMatrix,
    spec: QuantizerSpec,
    alpha: float,
    objectives: Sequence[Objective],
    streams: SeedStreams,
    t: int,
    gradient_at: GradientPoint = GradientPoint.Z,
    audit: bool = False,
) -> Tuple[List[OptNodeState], int]:
    if len(objectives) != len(states):
        raise DimensionMismatch(f"{len(objectives)} objectives for {len(states)} nodes")
    mix = quantized_mixing(states, A, spec, streams, t)

    new_states = []
    for i, s in enumerate(states):
        w = mix.mixed[i]
        z = w / mix.y[i]
        point = z if gradient_at == GradientPoint.Z else w
        grad = objectives[i].sample_gradient(point, streams.for_node(i, t, Purpose.GRADIENT))
        rounds = s.rounds + 1
        new_states.append(
            OptNodeState(
                x=w - alpha * grad,
                x_hat_self=mix.x_hat_self[i],
                x_hat_in=mix.x_hat_in[i],
                y=mix.y[i],
                z=z,
                w=w,
                z_time_avg=s.z_time_avg + (z - s.z_time_avg) / rounds,
                rounds=rounds,
                grad=grad,
            )
        )
    if audit:
        audit_replicas(new_states, settings.REPLICA_TOLERANCE)
    return new_states, mix.bits


def network_constants(objectives: Sequence[Objective]) -> Optional[ObjectiveConstants]:
    """Worst-case L, D^2 and sigma^2 over the nodes, D^2 taken at the zero start and x*."""
    x_star = global_optimum(objectives)
    points = [np.zeros(objectives[0].dim)] + ([x_star] if x_star is not None else [])
    per_node = [obj.constants(points) for obj in objectives]
    if any(c is None for c in per_node):
        return None
    return ObjectiveConstants(
        L=max(c.L for c in per_node),
        d_sq=max(c.d_sq for c in per_node),
        sigma_sq=max(c.sigma_sq for c in per_node),
        estimated=any(c.estimated for c in per_node),
    )


def default_step_size(mode: Mode, n: int, L: float, rounds: int) -> float:
    if mode == Mode.CONVEX:
        return math.sqrt(n) / (8.0 * L * math.sqrt(rounds))
    return math.sqrt(n) / (L * math.sqrt(rounds))


def run_optimization(
    cfg: ExperimentConfig,
    objectives: Optional[Sequence[Objective]] = None,
) -> MetricsTrace:
    """
    Run quantized push-sum SGD for ``cfg.rounds`` rounds.

    ``objectives`` overrides the preset named by ``cfg.objective`` (one per node).
    """
    net = prepare_network(cfg)
    graph, A, profile, spec = net.graph, net.A, net.profile, net.spec
    n = graph.n
    streams = SeedStreams(cfg.seed)
    if objectives is None:
        objectives = build_objectives(cfg.objective, n, streams, cfg.batch_size)
    if len(objectives) != n:
        raise DimensionMismatch(f"{len(objectives)} objectives for a {n}-node graph")
    d = objectives[0].dim

    constants = network_constants(objectives)
    warnings: List[str] = []
    if cfg.alpha is not None:
        alpha = cfg.alpha
    else:
        L = constants.L if constants is not None else 1.0
        alpha = default_step_size(cfg.mode, n, L, cfg.rounds)

    omega = math.sqrt(omega_sq(d, spec))
    d_sq = constants.d_sq if constants is not None else 0.0
    bounds = safe_theory_bounds(profile, n, d_sq, cfg.enforce_admissibility, warnings)
    admissible = None if bounds is None else omega <= bounds.omega_max_opt
    if cfg.enforce_admissibility and admissible is False:
        message = (
            f"omega={omega:.4g} exceeds the optimization threshold "
            f"lambda_tilde_2/sqrt(6(1+gamma^2))={bounds.omega_max_opt:.4g}"
        )
        logger.warning("[SGD] %s", message)
        warnings.append(message)

    x_star = global_optimum(objectives)
    f_star = global_loss(objectives, x_star) if x_star is not None else None
    offset = f_star if f_star is not None else 0.0

    states = init_optimization(graph, d)
    initial_error = global_loss(objectives, np.zeros(d)) - offset
    records = []
    cum_bits = 0
    for t in range(1, cfg.rounds + 1):
        x_t = stack_states(states)
        x_bar = x_t.mean(axis=0)
        step = alpha / t if cfg.alpha_decay else alpha
        audit = cfg.audit_interval > 0 and t % cfg.audit_interval == 0
        states, bits = sgd_round(
            states, A, spec, step, objectives, streams, t,
            gradient_at=cfg.gradient_at, audit=audit,
        )
        cum_bits += bits
        z_next = stack_states(states, "z")
        gaps = [global_loss(objectives, s.z_time_avg) - offset for s in states]
        records.append({
            "round": t,
            "gap_node1_avg": gaps[0],
            "cons_err_max": float(np.max(np.sum((z_next - x_bar) ** 2, axis=1))),
            "grad_norm_sq": float(np.sum(global_gradient(objectives, x_bar) ** 2)),
            "residual_u": float(np.sum((x_t - stack_states(states, "x_hat_self")) ** 2)),
            "cum_bits": cum_bits,
            "gap_max_avg": float(max(gaps)),
        })
        if t % 100 == 0:
            logger.debug("[SGD] round %d gap=%.3e cons=%.3e", t, gaps[0], records[-1]["cons_err_max"])

    logger.info(
        "[SGD] %s finished %d rounds: alpha=%.4g gap=%.3e bits=%d",
        graph.name, cfg.rounds, alpha, records[-1]["gap_node1_avg"], cum_bits,
    )
    metadata = RunMetadata(
        config=cfg.model_dump(mode="json"),
        n=n,
        arcs=graph.edge_count,
        dimension=d,
        message_bits=message_bits(d, spec),
        bits_per_round=graph.edge_count * message_bits(d, spec),
        omega=omega,
        spectral_profile=profile,
        theory_bounds=bounds,
        admissible=admissible,
        warnings=warnings,
        alpha=alpha,
        objective_constants=constants,
        initial_error=initial_error,
        x1_norm=0.0,
        optimal_value=f_star,
    )
    return MetricsTrace(columns=OPT_COLUMNS, records=records, metadata=metadata)

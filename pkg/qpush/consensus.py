"""
Quantized push-sum gossip over a directed graph, simulated node by node in
synchronous rounds. Every node reads only round-t values and writes round t+1.
"""

import logging
import math
from dataclasses import dataclass
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from qpush.config import settings
from qpush.exceptions import DegenerateSpectrum, DimensionMismatch, ReplicaDivergence
from qpush.graph import (
    ColumnStochasticMatrix,
    DirectedGraph,
    SpectralProfile,
    TheoryBounds,
    build_topology,
    estimate_spectral_profile,
    gossip_error_bound,
    out_degree_weight_matrix,
    theory_bounds,
)
from qpush.models import GossipNodeState, PushSumNodeState
from qpush.quantizer import QuantizerSpec, dequantize, message_bits, omega_sq, quantize
from qpush.schemas import ExperimentConfig, MetricsTrace, RunMetadata
from qpush.utils.seeding import Purpose, SeedStreams

logger = logging.getLogger(__name__)

GOSSIP_COLUMNS = ["round", "max_err", "mean_err", "residual_u", "mass_drift", "cum_bits", "residual_r"]


@dataclass
class Network:
    graph: DirectedGraph
    A: ColumnStochasticMatrix
    profile: SpectralProfile
    spec: QuantizerSpec


@dataclass
class MixingResult:
    # x_i(t) - x_hat_i(t+1) + sum_j a_ij x_hat_j(t+1), self term included
    mixed: List[np.ndarray]
    x_hat_self: List[np.ndarray]
    x_hat_in: List[Dict[int, np.ndarray]]
    y: List[float]
    bits: int


def prepare_network(cfg: ExperimentConfig) -> Network:
    graph = build_topology(cfg.graph)
    A = out_degree_weight_matrix(graph)
    horizon = max(cfg.spectral_horizon, 2 * graph.n)
    profile = estimate_spectral_profile(A, horizon, settings.SPECTRAL_TOL)
    spec = QuantizerSpec.from_preset(cfg.quantizer, cfg.norm_bits, cfg.scalar_bits)
    return Network(graph=graph, A=A, profile=profile, spec=spec)


def safe_theory_bounds(
    profile: SpectralProfile,
    n: int,
    d_sq: float,
    enabled: bool,
    warnings: List[str],
) -> Optional[TheoryBounds]:
    try:
        return theory_bounds(profile, n, d_sq, enabled)
    except DegenerateSpectrum as e:
        message = f"theory bounds unavailable: {e.detail}"
        logger.info("[GOSSIP] %s", message)
        warnings.append(message)
        return None


def stack_states(states: Sequence[PushSumNodeState], attr: str = "x") -> np.ndarray:
    return np.vstack([getattr(s, attr) for s in states])


# ==================== ROUND MECHANICS ====================

def quantized_mixing(
    states: Sequence[PushSumNodeState],
    A: ColumnStochasticMatrix,
    spec: QuantizerSpec,
    streams: SeedStreams,
    t: int,
) -> MixingResult:
    """Quantization, replica update and averaging shared by gossip and SGD."""
    n = len(states)
    if A.n != n:
        raise DimensionMismatch(f"Mixing matrix is {A.n}x{A.n} but there are {n} node states")
    d = states[0].dim

    # (1) every node encodes its own innovation from round-t values
    messages = [
        quantize(s.x - s.x_hat_self, spec, streams.for_node(i, t, Purpose.QUANTIZE), y=s.y)
        for i, s in enumerate(states)
    ]
    increments = [dequantize(m, spec) for m in messages]

    # (2) every copy of x_hat_j advances by the same Q_j
    new_self = [s.x_hat_self + increments[i] for i, s in enumerate(states)]
    new_in = [
        {j: replica + increments[j] for j, replica in s.x_hat_in.items()}
        for s in states
    ]

    mixed: List[np.ndarray] = []
    new_y: List[float] = []
    arcs = 0
    weights = A.weights
    for i, s in enumerate(states):
        replicas = {**new_in[i], i: new_self[i]}
        scalars = {j: messages[j].y for j in new_in[i]}
        scalars[i] = s.y
        # accumulate in ascending source order; the matrix-form oracle does the same
        sources = sorted(replicas)
        first = sources[0]
        acc = weights[i, first] * replicas[first]
        y_next = weights[i, first] * scalars[first]
        for j in sources[1:]:
            acc = acc + weights[i, j] * replicas[j]
            y_next = y_next + weights[i, j] * scalars[j]
        mixed.append((s.x - new_self[i]) + acc)
        new_y.append(float(y_next))
        arcs += len(new_in[i])

    return MixingResult(
        mixed=mixed,
        x_hat_self=new_self,
        x_hat_in=new_in,
        y=new_y,
        bits=arcs * message_bits(d, spec),
    )


def audit_replicas(states: Sequence[PushSumNodeState], tol: float) -> float:
    """Check every replica of x_hat_j against node j's own copy."""
    worst = 0.0
    for i, s in enumerate(states):
        for j, replica in s.x_hat_in.items():
            gap = float(np.max(np.abs(replica - states[j].x_hat_self)))
            if gap > tol:
                raise ReplicaDivergence(
                    f"Replica of x_hat_{j} held by node {i} differs from the source by {gap:.3e}"
                )
            worst = max(worst, gap)
    return worst


# ==================== GOSSIP ====================

def init_gossip(g: DirectedGraph, x_init: np.ndarray, d: int) -> List[GossipNodeState]:
    x_init = np.asarray(x_init, dtype=np.float64)
    if x_init.ndim == 1 and d == 1:
        x_init = x_init.reshape(-1, 1)
    if x_init.shape != (g.n, d):
        raise DimensionMismatch(f"Initial values have shape {x_init.shape}, expected ({g.n}, {d})")
    states = []
    for i in range(g.n):
        x = x_init[i].copy()
        states.append(
            GossipNodeState(
                x=x,
                x_hat_self=np.zeros(d),
                x_hat_in={j: np.zeros(d) for j in g.in_neighbors(i)},
                y=1.0,
                z=x.copy(),
            )
        )
    return states


def gossip_round(
    states: Sequence[GossipNodeState],
    A: ColumnStochasticMatrix,
    spec: QuantizerSpec,
    streams: SeedStreams,
    t: int,
    audit: bool = False,
    tol: Optional[float] = None,
) -> Tuple[List[GossipNodeState], int]:
    mix = quantized_mixing(states, A, spec, streams, t)
    new_states = [
        GossipNodeState(
            x=mix.mixed[i],
            x_hat_self=mix.x_hat_self[i],
            x_hat_in=mix.x_hat_in[i],
            y=mix.y[i],
            z=mix.mixed[i] / mix.y[i],
        )
        for i in range(len(states))
    ]
    if audit:
        audit_replicas(new_states, settings.REPLICA_TOLERANCE if tol is None else tol)
    return new_states, mix.bits


def initial_values(cfg: ExperimentConfig, n: int, streams: SeedStreams) -> np.ndarray:
    rng = streams.global_stream(Purpose.INIT)
    if cfg.init == "gaussian":
        return rng.standard_normal((n, cfg.dim))
    return rng.random((n, cfg.dim))


def run_gossip(cfg: ExperimentConfig) -> MetricsTrace:
    net = prepare_network(cfg)
    graph, A, profile, spec = net.graph, net.A, net.profile, net.spec
    n, d = graph.n, cfg.dim
    streams = SeedStreams(cfg.seed)
    x1 = initial_values(cfg, n, streams)

    warnings: List[str] = []
    omega = math.sqrt(omega_sq(d, spec))
    bounds = safe_theory_bounds(profile, n, 0.0, cfg.enforce_admissibility, warnings)
    admissible = None if bounds is None else omega <= bounds.omega_max_gossip
    if cfg.enforce_admissibility and admissible is False:
        message = (
            f"omega={omega:.4g} exceeds the gossip threshold "
            f"lambda_tilde_1/(1+gamma)={bounds.omega_max_gossip:.4g}"
        )
        logger.warning("[GOSSIP] %s", message)
        warnings.append(message)

    states = init_gossip(graph, x1, d)
    target = x1.mean(axis=0)
    mass_0 = x1.sum(axis=0)
    limit = np.outer(profile.phi_vector, mass_0)
    x1_norm = float(np.linalg.norm(x1))
    initial_error = float(max(np.linalg.norm(s.z - target) for s in states))

    records = []
    cum_bits = 0
    for t in range(1, cfg.rounds + 1):
        x_t = stack_states(states)
        audit = cfg.audit_interval > 0 and t % cfg.audit_interval == 0
        states, bits = gossip_round(states, A, spec, streams, t, audit=audit)
        cum_bits += bits
        x_next = stack_states(states)
        errors = np.linalg.norm(stack_states(states, "z") - target, axis=1)
        records.append({
            "round": t,
            "max_err": float(errors.max()),
            "mean_err": float(errors.mean()),
            "residual_u": float(np.linalg.norm(x_t - stack_states(states, "x_hat_self"))),
            "mass_drift": float(np.abs(x_next.sum(axis=0) - mass_0).sum()),
            "cum_bits": cum_bits,
            "residual_r": float(np.linalg.norm(x_next - limit)),
        })
        if t % 100 == 0:
            logger.debug("[GOSSIP] round %d max_err=%.3e", t, records[-1]["max_err"])

    error_bound = None
    if bounds is not None:
        error_bound = gossip_error_bound(profile, omega, x1_norm, cfg.rounds)
    logger.info(
        "[GOSSIP] %s finished %d rounds: max_err=%.3e, bits=%d",
        graph.name, cfg.rounds, records[-1]["max_err"], cum_bits,
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
        initial_error=initial_error,
        x1_norm=x1_norm,
        error_bound_final=error_bound,
    )
    return MetricsTrace(columns=GOSSIP_COLUMNS, records=records, metadata=metadata)

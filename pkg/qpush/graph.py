"""
Directed topologies, column-stochastic mixing matrices and the push-sum
constants (phi, lambda, C, delta, gamma) estimated from them.
"""

import logging
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import FrozenSet, Iterable, List, Optional, Tuple

import networkx as nx
import numpy as np
import pandas as pd
from pydantic import BaseModel

from qpush.config import settings
from qpush.exceptions import (
    DegenerateSpectrum,
    InvalidGraph,
    NoConvergence,
    NotStronglyConnected,
)

logger = logging.getLogger(__name__)

Edge = Tuple[int, int]

COLUMN_SUM_TOL = 1e-12
NORM_FLOOR = 1e-14
C_INFLATION = 1.05
DELTA_MARGIN = 0.99

# Canonical encodings of the two 10-node benchmark graphs.
G1_EXTRA_ARCS: Tuple[Edge, ...] = ((2, 1), (7, 6))
G2_CHORDS: Tuple[Edge, ...] = ((4, 9), (2, 7))


@dataclass(frozen=True)
class DirectedGraph:
    """Strongly connected digraph on nodes 0..n-1 with implicit self-loops."""

    n: int
    edges: FrozenSet[Edge]
    name: str = "custom"
    _digraph: nx.DiGraph = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        if self.n < 1:
            raise InvalidGraph(f"Graph needs at least one node, got n={self.n}")
        for src, dst in self.edges:
            if not (0 <= src < self.n and 0 <= dst < self.n):
                raise InvalidGraph(f"Edge ({src}, {dst}) references a node outside 0..{self.n - 1}")
            if src == dst:
                raise InvalidGraph(f"Self-loop ({src}, {dst}) must not be listed; self-loops are implicit")
        digraph = nx.DiGraph()
        digraph.add_nodes_from(range(self.n))
        digraph.add_edges_from(self.edges)
        object.__setattr__(self, "_digraph", digraph)
        if not nx.is_strongly_connected(digraph):
            raise NotStronglyConnected(
                f"Graph '{self.name}' with {self.n} nodes is not strongly connected"
            )

    @property
    def edge_count(self) -> int:
        return len(self.edges)

    def in_neighbors(self, i: int) -> List[int]:
        """In-neighbours of ``i`` excluding the self-loop."""
        return sorted(self._digraph.predecessors(i))

    def out_neighbors(self, i: int) -> List[int]:
        return sorted(self._digraph.successors(i))

    def out_degree(self, i: int) -> int:
        """Out-degree including the self-loop."""
        return self._digraph.out_degree(i) + 1

    def in_degree(self, i: int) -> int:
        return self._digraph.in_degree(i) + 1


@dataclass(frozen=True)
class ColumnStochasticMatrix:
    """Dense mixing matrix; ``weights[i, j]`` is the weight node i gives node j."""

    weights: np.ndarray

    def __post_init__(self):
        w = np.asarray(self.weights, dtype=np.float64)
        if w.ndim != 2 or w.shape[0] != w.shape[1]:
            raise InvalidGraph(f"Mixing matrix must be square, got shape {w.shape}")
        if np.any(w < 0):
            raise InvalidGraph("Mixing matrix has negative entries")
        if np.any(np.diag(w) <= 0):
            raise InvalidGraph("Mixing matrix needs a strictly positive diagonal")
        col_err = np.max(np.abs(w.sum(axis=0) - 1.0))
        if col_err > COLUMN_SUM_TOL:
            raise InvalidGraph(f"Mixing matrix is not column stochastic (max column error {col_err:.3e})")
        w.setflags(write=False)
        object.__setattr__(self, "weights", w)

    @property
    def n(self) -> int:
        return self.weights.shape[0]

    def in_neighbors(self, i: int) -> List[int]:
        """Nodes j != i with a_ij > 0."""
        return [j for j in np.flatnonzero(self.weights[i] > 0).tolist() if j != i]

    def is_doubly_stochastic(self, tol: float = COLUMN_SUM_TOL) -> bool:
        return bool(np.max(np.abs(self.weights.sum(axis=1) - 1.0)) <= tol)


class SpectralProfile(BaseModel):
    phi: List[float]
    lambda_est: float
    c_est: float
    delta_est: float
    delta_raw: float
    gamma: float
    horizon: int
    fit_skipped: bool = False

    @property
    def phi_vector(self) -> np.ndarray:
        return np.asarray(self.phi, dtype=np.float64)


class TheoryBounds(BaseModel):
    lambda_tilde_1: float
    lambda_tilde_2: float
    xi: float
    omega_max_gossip: float
    omega_max_opt: float
    enforced: bool = True


# ==================== TOPOLOGIES ====================

def ring(n: int) -> DirectedGraph:
    edges = frozenset((i, (i + 1) % n) for i in range(n) if (i + 1) % n != i)
    return DirectedGraph(n=n, edges=edges, name=f"ring:{n}")


def complete(n: int) -> DirectedGraph:
    edges = frozenset((i, j) for i in range(n) for j in range(n) if i != j)
    return DirectedGraph(n=n, edges=edges, name=f"complete:{n}")


def g1() -> DirectedGraph:
    cycle = {(i, (i + 1) % 10) for i in range(10)}
    return DirectedGraph(n=10, edges=frozenset(cycle | set(G1_EXTRA_ARCS)), name="g1")


def g2() -> DirectedGraph:
    cycle = {(i, (i + 1) % 10) for i in range(10)} | {((i + 1) % 10, i) for i in range(10)}
    return DirectedGraph(n=10, edges=frozenset(cycle | set(G2_CHORDS)), name="g2")


def custom(n: int, edges: Iterable[Edge], name: str = "custom") -> DirectedGraph:
    # Listed self-loops are dropped since they are always present
    return DirectedGraph(n=n, edges=frozenset((int(s), int(d)) for s, d in edges if s != d), name=name)


def read_edge_list(path: str) -> Tuple[int, List[Edge]]:
    """Read a "src dst" per line file (0-indexed, '#' comments)."""
    file_path = Path(path)
    if not file_path.is_file():
        raise InvalidGraph(f"Edge list file not found: {path}")
    try:
        df = pd.read_csv(file_path, sep=r"\s+", header=None, comment="#", dtype=str)
    except pd.errors.EmptyDataError:
        raise InvalidGraph(f"Edge list file is empty: {path}")
    except pd.errors.ParserError:
        raise InvalidGraph(f"Edge list {path} has lines with more than two columns")
    if df.empty:
        raise InvalidGraph(f"Edge list file is empty: {path}")
    if df.shape[1] != 2:
        raise InvalidGraph(f"Edge list {path} must have exactly two columns, found {df.shape[1]}")
    if df.isna().any().any():
        raise InvalidGraph(f"Edge list {path} has lines without a 'src dst' pair")
    tokens = pd.concat([df[0], df[1]])
    if not tokens.str.fullmatch(r"-?\d+").all():
        raise InvalidGraph(f"Edge list {path} has non-integer node ids")
    edges = [(int(s), int(d)) for s, d in df.itertuples(index=False)]
    if any(s < 0 or d < 0 for s, d in edges):
        raise InvalidGraph(f"Edge list {path} has negative node ids")
    n = max(max(s, d) for s, d in edges) + 1
    if n > settings.MAX_NODES:
        raise InvalidGraph(f"Edge list {path} names {n} nodes; the limit is {settings.MAX_NODES}")
    return n, edges


def parse_graph_preset(preset: str) -> Tuple[str, Optional[str]]:
    """Split "ring:3" style presets into (kind, argument) and validate the kind."""
    kind, _, arg = preset.strip().partition(":")
    kind = kind.lower()
    if kind in ("g1", "g2"):
        if arg:
            raise InvalidGraph(f"Preset '{kind}' takes no argument")
        return kind, None
    if kind in ("ring", "complete"):
        if not arg.isdigit() or int(arg) < 1:
            raise InvalidGraph(f"Preset '{preset}' needs a positive node count, e.g. '{kind}:4'")
        if int(arg) > settings.MAX_NODES:
            raise InvalidGraph(f"Preset '{preset}' exceeds the node limit of {settings.MAX_NODES}")
        return kind, arg
    if kind == "custom":
        if not arg:
            raise InvalidGraph("Preset 'custom' needs a path, e.g. 'custom:edges.txt'")
        return kind, arg
    raise InvalidGraph(f"Unknown graph preset '{preset}'. Use ring:<n>, g1, g2, complete:<n> or custom:<path>")


def build_topology(preset: str) -> DirectedGraph:
    kind, arg = parse_graph_preset(preset)
    if kind == "ring":
        graph = ring(int(arg))
    elif kind == "complete":
        graph = complete(int(arg))
    elif kind == "g1":
        graph = g1()
    elif kind == "g2":
        graph = g2()
    else:
        n, edges = read_edge_list(arg)
        graph = custom(n, edges, name=preset)
    logger.debug("[GRAPH] built %s: n=%d, arcs=%d", graph.name, graph.n, graph.edge_count)
    return graph


# ==================== WEIGHTS ====================

def out_degree_weight_matrix(g: DirectedGraph) -> ColumnStochasticMatrix:
    """a_ij = 1/d_j^out for every arc j->i and for i = j."""
    weights = np.zeros((g.n, g.n), dtype=np.float64)
    for j in range(g.n):
        share = 1.0 / g.out_degree(j)
        weights[j, j] = share
        for i in g.out_neighbors(j):
            weights[i, j] = share
    return ColumnStochasticMatrix(weights)


# ==================== SPECTRAL PROFILE ====================

def stationary_vector(A: ColumnStochasticMatrix, tol: float, max_steps: int) -> np.ndarray:
    """Power iteration for phi with A phi = phi, phi >= 0, sum(phi) = 1."""
    phi = np.full(A.n, 1.0 / A.n)
    for _ in range(max_steps):
        nxt = A.weights @ phi
        nxt /= nxt.sum()
        if np.linalg.norm(nxt - phi) <= tol:
            return nxt
        phi = nxt
    raise NoConvergence(f"Power iteration did not reach tol={tol:g} within {max_steps} steps")


def estimate_spectral_profile(
    A: ColumnStochasticMatrix,
    horizon: int,
    tol: float,
) -> SpectralProfile:
    n = A.n
    if horizon < 2 * n:
        raise InvalidGraph(f"Spectral horizon must be at least 2n={2 * n}, got {horizon}")
    if tol <= 0:
        raise InvalidGraph(f"Spectral tolerance must be positive, got {tol}")

    phi = stationary_vector(A, tol, max_steps=10 * horizon)
    limit = np.outer(phi, np.ones(n))

    power = np.eye(n)
    ones = np.ones(n)
    norms = np.empty(horizon)
    row_sums = np.empty((horizon, n))
    for t in range(horizon):
        power = A.weights @ power
        norms[t] = np.linalg.norm(power - limit, ord=2)
        row_sums[t] = power @ ones

    rounds = np.arange(1, horizon + 1, dtype=np.float64)
    valid = norms >= NORM_FLOOR
    if valid.sum() < 2:
        fit_skipped = True
        lambda_est, c_est = 0.0, 1.0
    else:
        fit_skipped = False
        slope, intercept = np.polyfit(rounds[valid], np.log(norms[valid]), 1)
        lambda_est = float(math.exp(slope))
        c_est = C_INFLATION * float(math.exp(intercept))
        # Keep ||A^t - phi 1^T|| <= C lambda^t on every sampled round
        worst = float(np.max(np.log(norms[valid]) - rounds[valid] * slope))
        if math.exp(worst) > c_est:
            c_est = C_INFLATION * math.exp(worst)

    delta_raw = float(row_sums.min())
    if np.max(np.abs(row_sums - 1.0)) <= COLUMN_SUM_TOL:
        delta_est = delta_raw
    else:
        delta_est = DELTA_MARGIN * delta_raw

    gamma = float(np.linalg.norm(A.weights - np.eye(n), ord=2))
    profile = SpectralProfile(
        phi=phi.tolist(),
        lambda_est=lambda_est,
        c_est=c_est,
        delta_est=delta_est,
        delta_raw=delta_raw,
        gamma=gamma,
        horizon=horizon,
        fit_skipped=fit_skipped,
    )
    logger.debug(
        "[GRAPH] profile: lambda=%.6f C=%.4f delta=%.4f gamma=%.4f skipped=%s",
        lambda_est, c_est, delta_est, gamma, fit_skipped,
    )
    return profile


def theory_bounds(sp: SpectralProfile, n: int, d_sq: float, enabled: bool = True) -> TheoryBounds:
    lam, c, gamma = sp.lambda_est, sp.c_est, sp.gamma
    if not (0.0 < lam < 1.0 - 1e-9):
        raise DegenerateSpectrum(
            f"lambda_est={lam!r} is outside (0, 1); admissibility thresholds are undefined"
        )
    lambda_tilde_1 = 1.0 / (2.0 * lam ** -0.5 + 4.0 * c / (lam - lam ** 1.5))
    mixing = 1.0 + 6.0 * c ** 2 / (1.0 - lam) ** 2
    lambda_tilde_2 = mixing ** -0.5
    xi = 6.0 * n * d_sq * (1.0 + gamma ** 2) * mixing
    return TheoryBounds(
        lambda_tilde_1=lambda_tilde_1,
        lambda_tilde_2=lambda_tilde_2,
        xi=xi,
        omega_max_gossip=lambda_tilde_1 / (1.0 + gamma),
        omega_max_opt=lambda_tilde_2 / math.sqrt(6.0 * (1.0 + gamma ** 2)),
        enforced=enabled,
    )


def gossip_error_bound(sp: SpectralProfile, omega: float, x1_norm: float, t: int) -> float:
    """Right-hand side of the quantized gossip error bound at round t+1."""
    lam, c, gamma, delta = sp.lambda_est, sp.c_est, sp.gamma, sp.delta_est
    if not (0.0 < lam < 1.0):
        raise DegenerateSpectrum(f"lambda_est={lam!r} is outside (0, 1)")
    xi_1 = omega * (1.0 + gamma) * x1_norm * max(4.0 * c / lam, lam ** -0.5)
    return (
        c * xi_1 / (delta * (1.0 - lam ** 0.5)) * lam ** (t / 2.0)
        + 2.0 * c * x1_norm / delta * lam ** t
    )

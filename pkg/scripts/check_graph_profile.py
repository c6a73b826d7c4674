"""
Script to print the estimated push-sum constants of a graph preset.

Usage: python scripts/check_graph_profile.py [preset ...]   (default: g1 g2)
"""

import sys
from pathlib import Path

sys.path.insert(0, str(Path(__file__).parent.parent))

from qpush.config import settings
from qpush.exceptions import DegenerateSpectrum, QPushError
from qpush.graph import build_topology, estimate_spectral_profile, out_degree_weight_matrix, theory_bounds


def check_graph_profile(preset: str) -> bool:
    """Print the spectral profile and theory thresholds of one preset."""
    print("=" * 60)
    print(f"Graph Profile: {preset}")
    print("=" * 60)

    try:
        graph = build_topology(preset)
        A = out_degree_weight_matrix(graph)
        profile = estimate_spectral_profile(A, max(settings.SPECTRAL_HORIZON, 2 * graph.n), settings.SPECTRAL_TOL)
    except QPushError as e:
        print(f"\n[X] {e.detail}")
        return False

    print("\n1. Topology:")
    print(f"   Nodes: {graph.n}")
    print(f"   Arcs (self-loops excluded): {graph.edge_count}")
    print(f"   Doubly stochastic: {'Yes' if A.is_doubly_stochastic() else 'No'}")

    print(f"\n2. Spectral profile (horizon {profile.horizon}):")
    print(f"   phi: {', '.join(f'{p:.4f}' for p in profile.phi)}")
    print(f"   lambda: {profile.lambda_est:.6f}")
    print(f"   C: {profile.c_est:.4f}")
    print(f"   delta: {profile.delta_est:.4f} (raw {profile.delta_raw:.4f})")
    print(f"   gamma: {profile.gamma:.4f}")
    if profile.fit_skipped:
        print("   [!] Fit skipped: A^t reaches phi 1^T within the norm floor")

    print("\n3. Theory thresholds:")
    try:
        bounds = theory_bounds(profile, graph.n, d_sq=1.0)
    except DegenerateSpectrum as e:
        print(f"   [!] {e.detail}")
        return True
    print(f"   lambda_tilde_1: {bounds.lambda_tilde_1:.6f}")
    print(f"   lambda_tilde_2: {bounds.lambda_tilde_2:.6f}")
    print(f"   omega max (gossip): {bounds.omega_max_gossip:.6f}")
    print(f"   omega max (optimization): {bounds.omega_max_opt:.6f}")
    print("\n[OK] Profile estimated")
    return True


if __name__ == "__main__":
    presets = sys.argv[1:] or ["g1", "g2"]
    results = [check_graph_profile(p) for p in presets]
    sys.exit(0 if all(results) else 1)

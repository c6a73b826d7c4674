"""
Script to check the stochastic quantizer contract on a random vector.

Usage: python scripts/check_quantizer.py [levels:<s>] [dimension] [draws]
"""

import sys
from pathlib import Path

sys.path.insert(0, str(Path(__file__).parent.parent))

import numpy as np

from qpush.quantizer import QuantizerSpec, empirical_moments, message_bits, omega_sq
from qpush.utils.seeding import Purpose, SeedStreams


def check_quantizer(preset: str = "levels:16", d: int = 64, draws: int = 100_000) -> bool:
    print("=" * 60)
    print(f"Quantizer Check: {preset}, d={d}, {draws} draws")
    print("=" * 60)

    spec = QuantizerSpec.from_preset(preset)
    streams = SeedStreams(1)
    x = streams.global_stream(Purpose.DIAGNOSTIC).standard_normal(d)
    mean, std, err_sq = empirical_moments(x, spec, streams.global_stream(Purpose.QUANTIZE), draws)

    print("\n1. Bits per message:")
    print(f"   Quantized: {message_bits(d, spec)}")
    print(f"   Full precision: {message_bits(d, QuantizerSpec.from_preset('identity'))}")

    print("\n2. Unbiasedness:")
    stderr = np.maximum(std / np.sqrt(draws), 1e-300)
    z_max = float(np.max(np.abs(mean - x) / stderr))
    unbiased = z_max <= 4.0
    print(f"   Largest |mean - x| in standard errors: {z_max:.2f}")
    print(f"   {'[OK]' if unbiased else '[X]'} within 4 standard errors")

    print("\n3. Variance:")
    bound = omega_sq(d, spec) * float(x @ x)
    within = err_sq <= 1.05 * bound
    print(f"   E||Q(x) - x||^2: {err_sq:.6f}")
    print(f"   omega^2 ||x||^2: {bound:.6f}")
    print(f"   {'[OK]' if within else '[X]'} within 5% of the bound")
    return unbiased and within


if __name__ == "__main__":
    args = sys.argv[1:]
    ok = check_quantizer(
        args[0] if len(args) > 0 else "levels:16",
        int(args[1]) if len(args) > 1 else 64,
        int(args[2]) if len(args) > 2 else 100_000,
    )
    sys.exit(0 if ok else 1)

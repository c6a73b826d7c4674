"""
Command line entry point.

    python -m qpush run --config cfg.json [--mode gossip --graph g1 --quant levels:16 ...]
    python -m qpush validate [--rounds 100 --seed 1]
    python -m qpush compare --quantized q.json --exact e.json --targets 1e-1,1e-2
"""

import argparse
import logging
import sys
from typing import List, Optional

from qpush.config import settings
from qpush.exceptions import ConfigInvalid, QPushError
from qpush.harness import bits_to_error, load_config, run
from qpush.models import Mode
from qpush.schemas import MetricsTrace
from qpush.utils.logging import configure_logging

logger = logging.getLogger(__name__)


def parse_targets(text: str) -> List[float]:
    try:
        return [float(part) for part in text.split(",") if part.strip()]
    except ValueError:
        raise ConfigInvalid({"targets": f"'{text}' is not a comma-separated list of numbers"})


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="qpush", description="Quantized push-sum simulator")
    parser.add_argument("--log-level", default=None, help="overrides QPUSH_LOG_LEVEL")
    sub = parser.add_subparsers(dest="command", required=True)

    run_p = sub.add_parser("run", help="run one experiment and write its trace")
    run_p.add_argument("--config", help="flat JSON experiment config")
    run_p.add_argument("--mode", choices=[m.value for m in Mode])
    run_p.add_argument("--graph")
    run_p.add_argument("--quant", dest="quantizer")
    run_p.add_argument("--dim", type=int)
    run_p.add_argument("--rounds", type=int)
    run_p.add_argument("--seed", type=int)
    run_p.add_argument("--alpha", type=float)
    run_p.add_argument("--objective")
    run_p.add_argument("--out", dest="output_dir")
    run_p.add_argument("--name")

    val_p = sub.add_parser("validate", help="cross-check engines against the matrix form")
    val_p.add_argument("--rounds", type=int, default=settings.VALIDATION_ROUNDS)
    val_p.add_argument("--seed", type=int, default=settings.DEFAULT_SEED)
    val_p.add_argument("--out", dest="output_dir")

    cmp_p = sub.add_parser("compare", help="bits needed to reach target errors")
    cmp_p.add_argument("--quantized", required=True)
    cmp_p.add_argument("--exact", required=True)
    cmp_p.add_argument("--targets", default="1e-1,1e-2,1e-3")
    cmp_p.add_argument("--absolute", action="store_true", help="targets are absolute, not relative")
    return parser


def command_run(args: argparse.Namespace) -> int:
    overrides = {
        key: getattr(args, key)
        for key in ("mode", "graph", "quantizer", "dim", "rounds", "seed", "alpha", "objective", "output_dir", "name")
    }
    cfg = load_config(args.config, overrides)
    trace = run(cfg)
    if cfg.mode == Mode.VALIDATE:
        return report_checks(trace)
    meta = trace.metadata
    print(f"[OK] {cfg.run_name}: {len(trace.records)} records written to {cfg.output_dir}")
    for warning in meta.warnings:
        print(f"[!] {warning}")
    return 0


def report_checks(trace: MetricsTrace) -> int:
    """Print one line per validation check; 1 if any failed."""
    failed = 0
    for record in trace.records:
        mark = "[OK]" if record["passed"] else "[X]"
        failed += not record["passed"]
        print(f"{mark} {record['name']:<30} max diff {record['max_abs_diff']:.3e} (tol {record['tolerance']:.1e})")
    return 1 if failed else 0


def command_validate(args: argparse.Namespace) -> int:
    cfg = load_config(None, {
        "mode": Mode.VALIDATE.value,
        "rounds": args.rounds,
        "seed": args.seed,
        "output_dir": args.output_dir,
    })
    return report_checks(run(cfg))


def command_compare(args: argparse.Namespace) -> int:
    table = bits_to_error(
        load_config(args.quantized),
        load_config(args.exact),
        parse_targets(args.targets),
        relative=not args.absolute,
    )
    print(table.to_string(index=False))
    return 0


COMMANDS = {"run": command_run, "validate": command_validate, "compare": command_compare}


def main(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    configure_logging(args.log_level)
    try:
        return COMMANDS[args.command](args)
    except QPushError as e:
        print(f"[ERROR] {e.detail}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())

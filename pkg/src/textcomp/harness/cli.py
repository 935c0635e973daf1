"""Command-line entry point.

    textcomp synth|train|eval|sweep-perturb|sweep-kern|ablate \
        --spec <file> [--out <dir>] [--seed <u64>] [--variant <name>]

BLAS threading is pinned to one thread per process (reductions stay
deterministic and CPU time is not wasted in spin loops); worker-process
parallelism for independent eval trials is capped by TEXTCOMP_THREADS.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from .runner import (
    cmd_ablate,
    cmd_eval,
    cmd_kern_sweep,
    cmd_perturb_sweep,
    cmd_synth,
    cmd_train,
)
from .spec import ExperimentSpec


def pin_blas_threads() -> None:
    try:
        from threadpoolctl import threadpool_limits

        threadpool_limits(1)
    except Exception:
        pass


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="textcomp",
                                description="compositional word-image model experiments")
    p.add_argument("command", choices=["synth", "train", "eval", "sweep-perturb",
                                       "sweep-kern", "ablate"])
    p.add_argument("--spec", required=True, help="experiment spec JSON")
    p.add_argument("--out", default=None, help="output directory (default: runs/<name>)")
    p.add_argument("--seed", type=int, default=None, help="override the spec seed")
    p.add_argument("--variant", default="full",
                   help="model variant for train/eval (default: full)")
    p.add_argument("-v", "--verbose", action="store_true")
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.INFO,
                        format="%(levelname)s %(name)s: %(message)s")
    pin_blas_threads()
    spec = ExperimentSpec.load(args.spec)
    if args.seed is not None:
        spec.seed = args.seed
    out = Path(args.out) if args.out else Path("runs") / spec.name
    out.mkdir(parents=True, exist_ok=True)
    if args.command == "synth":
        result = cmd_synth(spec, out)
    elif args.command == "train":
        result = cmd_train(spec, out, args.variant)
    elif args.command == "eval":
        result = cmd_eval(spec, out, args.variant)
    elif args.command == "sweep-perturb":
        result = {"rows": len(cmd_perturb_sweep(spec, out).rows),
                  "csv": str(out / "perturb_results.csv")}
    elif args.command == "sweep-kern":
        result = {"rows": len(cmd_kern_sweep(spec, out).rows),
                  "csv": str(out / "kern_results.csv")}
    else:
        result = {"rows": len(cmd_ablate(spec, out).rows),
                  "csv": str(out / "ablate_results.csv")}
    json.dump(result, sys.stdout, indent=1, sort_keys=True)
    print()
    return 0


if __name__ == "__main__":
    sys.exit(main())

"""Command line entry point: `zrplab <experiment> --config cfg.json --seed S
--out dir/ [--replicas R] [--threads K]`."""

from __future__ import annotations

import argparse
import json
import sys

from . import runners

RUNNERS = {
    "current-checks": runners.run_current_checks,
    "hydro-compare": runners.run_hydro_compare,
    "local-equilibrium": runners.run_local_equilibrium,
    "cesaro-marginal": runners.run_cesaro_marginal,
    "convergence": runners.run_convergence,
    "condensation": runners.run_condensation,
}


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="zrplab",
                                 description="zero-range process experiment runner")
    ap.add_argument("experiment", choices=sorted(RUNNERS))
    ap.add_argument("--config", help="JSON config file (defaults per experiment)")
    ap.add_argument("--seed", type=int, default=0, help="master seed")
    ap.add_argument("--out", default=None, help="output directory for report.json and CSVs")
    ap.add_argument("--replicas", type=int, default=None, help="override replica count")
    ap.add_argument("--threads", type=int, default=1, help="parallel replica workers")
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    cfg = {}
    if args.config:
        with open(args.config) as f:
            cfg = json.load(f)
    if args.replicas is not None:
        cfg["replicas"] = args.replicas
    report = RUNNERS[args.experiment](cfg, seed=args.seed, out_dir=args.out,
                                      threads=args.threads)
    json.dump(report["metrics"], sys.stdout, indent=1, sort_keys=True, default=float)
    print()
    return 0


if __name__ == "__main__":
    sys.exit(main())

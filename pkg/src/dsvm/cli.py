"""
Command-line entry point.

Exit codes: 0 success, 2 bad configuration, 3 integration diverged,
4 solver did not converge, 5 invariant violation (strict mode),
1 any other package error.
"""

from __future__ import annotations

import argparse
import json
import os
import sys

from .config import ExperimentConfig
from .errors import (ConfigError, DSVMError, IntegrationDiverged, InvariantViolation,
                     NonConvergence)

EXIT_CONFIG = 2
EXIT_DIVERGED = 3
EXIT_NONCONVERGENCE = 4
EXIT_INVARIANT = 5


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="key = value configuration file")
    common.add_argument("--seed", type=int)
    common.add_argument("--alpha", type=float)
    common.add_argument("--t-end", type=float, dest="t_end")
    common.add_argument("--out-dir", dest="out_dir")
    common.add_argument("--record-every", type=int, dest="record_every")
    common.add_argument("--dump-graphs", action="store_true", default=None, dest="dump_graphs")
    common.add_argument("--strict-invariants", action="store_true", default=None,
                        dest="strict_invariants")
    common.add_argument("--no-plots", action="store_false", default=None, dest="plots",
                        help="skip PNG figures")

    p = argparse.ArgumentParser(
        prog="dsvm",
        description="Distributed SVM by continuous-time gradient tracking over switching digraphs.")
    sub = p.add_subparsers(dest="command", required=True)
    sub.add_parser("run", parents=[common],
                   help="simulate, write trajectory/spectral/baseline/ellipse outputs")
    sub.add_parser("spectral-report", parents=[common],
                   help="eigenstructure report at t=0 only; prints JSON")
    sub.add_parser("baseline", parents=[common], help="centralized solution; prints JSON")
    sw = sub.add_parser("sweep", parents=[common], help="repeat the run for several alpha values")
    sw.add_argument("--alphas", help="comma-separated alpha values")
    sw.add_argument("--workers", type=int)
    sub.add_parser("gen-data", parents=[common], help="write the ellipse dataset CSV")
    return p


def load_config(args) -> ExperimentConfig:
    overrides = {k: getattr(args, k, None) for k in
                 ("seed", "alpha", "t_end", "out_dir", "record_every", "dump_graphs",
                  "strict_invariants", "plots", "workers")}
    alphas = getattr(args, "alphas", None)
    if alphas:
        try:
            overrides["sweep_alphas"] = tuple(float(a) for a in alphas.split(","))
        except ValueError:
            raise ConfigError("sweep_alphas", f"cannot parse {alphas!r}") from None
    if args.config:
        return ExperimentConfig.load(args.config, **overrides)
    try:
        return ExperimentConfig(**{k: v for k, v in overrides.items() if v is not None})
    except TypeError as exc:
        raise ConfigError("config", str(exc)) from None


def _emit(obj, out_dir=None, name=None):
    text = json.dumps(obj, indent=2, sort_keys=True)
    print(text)
    if out_dir and name:
        os.makedirs(out_dir, exist_ok=True)
        with open(os.path.join(out_dir, name), "w") as fh:
            fh.write(text + "\n")


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = load_config(args)
        from . import experiment
        if args.command == "run":
            summary = experiment.run_experiment(cfg)
            print(json.dumps(summary, indent=2, sort_keys=True))
        elif args.command == "spectral-report":
            _emit(experiment.spectral_only(cfg), cfg.out_dir, "spectral_report.json")
        elif args.command == "baseline":
            _emit(experiment.baseline_only(cfg), cfg.out_dir, "baseline.json")
        elif args.command == "sweep":
            print(json.dumps(experiment.run_sweep(cfg), indent=2, sort_keys=True))
        elif args.command == "gen-data":
            from .baseline import generate_ellipse_dataset
            os.makedirs(cfg.out_dir, exist_ok=True)
            path = os.path.join(cfg.out_dir, "dataset.csv")
            generate_ellipse_dataset(cfg.N, seed=cfg.seed).to_csv(path)
            print(path)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except IntegrationDiverged as exc:
        print(f"integration diverged: {exc}", file=sys.stderr)
        return EXIT_DIVERGED
    except NonConvergence as exc:
        print(f"solver did not converge: {exc}", file=sys.stderr)
        return EXIT_NONCONVERGENCE
    except InvariantViolation as exc:
        print(f"invariant violated: {exc}", file=sys.stderr)
        return EXIT_INVARIANT
    except DSVMError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())

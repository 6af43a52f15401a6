"""Command line front end: `simulate` runs a coupled convergence study.

Exit codes: 0 success, 2 invalid configuration, 3 numerical abort
(blow-up / step-size / undershoot guard), 4 replica failure.
"""
import argparse
import json
import logging
import sys

from .errors import (
    BlowUpError,
    ConfigError,
    ReplicaFailure,
    StepSizeError,
    UndershootError,
)
from .harness import (
    ExperimentConfig,
    preset,
    run_convergence_study,
    validate_config,
)

_NUMERICAL = (BlowUpError, StepSizeError, UndershootError)


def build_parser():
    p = argparse.ArgumentParser(
        prog="simulate",
        description="Coupled particle / stochastic Fokker-Planck convergence study",
    )
    p.add_argument("--config", help="JSON experiment configuration")
    p.add_argument(
        "--preset",
        choices=["burgers1d", "navier-stokes-2d", "keller-segel-2d"],
        help="shipped configuration (config file keys override preset values)",
    )
    p.add_argument("--seed", type=int, help="override the master seed")
    p.add_argument("--out", default="study_out", help="artifact directory")
    p.add_argument("--workers", type=int, default=1, help="replica worker processes")
    p.add_argument("--dump-particles", action="store_true",
                   help="dump replica-0 particle positions (CSV)")
    p.add_argument("--dump-fields", action="store_true",
                   help="dump replica-0 field snapshots (flat binary)")
    p.add_argument("--validate-only", action="store_true",
                   help="report configuration violations and exit")
    return p


def load_config(args):
    data = preset(args.preset).as_dict() if args.preset else {}
    if args.config:
        with open(args.config) as fh:
            data.update(json.load(fh))
    if not data:
        raise ConfigError(["provide --config and/or --preset"])
    if args.seed is not None:
        data["seed"] = args.seed
    return ExperimentConfig.from_dict(data)


def main(argv=None):
    logging.basicConfig(level=logging.INFO, format="%(levelname)s %(message)s")
    args = build_parser().parse_args(argv)
    try:
        cfg = load_config(args)
    except (ConfigError, OSError, json.JSONDecodeError) as exc:
        print(f"invalid configuration: {exc}", file=sys.stderr)
        return 2
    violations = validate_config(cfg)
    if args.validate_only:
        for v in violations:
            print(v)
        return 0 if not violations else 2
    if violations:
        for v in violations:
            print(f"config: {v}", file=sys.stderr)
        return 2
    try:
        result = run_convergence_study(
            cfg,
            out_dir=args.out,
            workers=args.workers,
            dump_fields=args.dump_fields,
            dump_particles=args.dump_particles,
        )
    except ConfigError as exc:
        print(f"invalid configuration: {exc}", file=sys.stderr)
        return 2
    except _NUMERICAL as exc:
        print(f"numerical abort: {exc}", file=sys.stderr)
        return 3
    except ReplicaFailure as exc:
        if isinstance(exc.cause, _NUMERICAL):
            print(f"numerical abort: {exc}", file=sys.stderr)
            return 3
        print(f"replica failure: {exc}", file=sys.stderr)
        return 4
    print(json.dumps(result.summary, indent=2, sort_keys=True))
    print(f"artifacts written to {args.out}", file=sys.stderr)
    return 0


if __name__ == "__main__":
    sys.exit(main())

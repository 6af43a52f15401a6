"""`figures` command: render one figure from a study artifact directory.

Exit codes: 0 success, 2 missing/invalid input files.
"""
import argparse
import sys

from .readers import SchemaError
from .render import render_field_snapshot, render_rate_plot, render_replica_spread


def build_parser():
    p = argparse.ArgumentParser(
        prog="figures",
        description="Render figures from study artifacts (never re-runs simulations)",
    )
    p.add_argument("--in", dest="in_dir", required=True,
                   help="study artifact directory")
    p.add_argument("--kind", required=True,
                   choices=["rate_plot", "replica_spread", "field_snapshot"])
    p.add_argument("--t", type=float, default=None,
                   help="snapshot time (field_snapshot; default: last frame)")
    p.add_argument("--field-file", default=None,
                   help="dump file name inside the input directory")
    p.add_argument("--out", required=True, help="output image path (.png/.svg/.pdf)")
    return p


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        if args.kind == "rate_plot":
            path = render_rate_plot(args.in_dir, args.out)
        elif args.kind == "replica_spread":
            path = render_replica_spread(args.in_dir, args.out)
        else:
            path, info = render_field_snapshot(
                args.in_dir, args.out, t=args.t, field_file=args.field_file
            )
            print(f"frame t={info['time']:.4f} mass={info['mass']:.3f}", file=sys.stderr)
    except SchemaError as exc:
        print(f"schema error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"io error: {exc}", file=sys.stderr)
        return 2
    print(path)
    return 0


if __name__ == "__main__":
    sys.exit(main())

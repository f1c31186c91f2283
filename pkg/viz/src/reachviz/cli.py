"""Command-line figure generation from exported CSVs.

  reachviz kernel   --grid g.csv [--grid g2.csv ...] [--overlay o.csv]
                    --out fig.png
  reachviz training --metrics m1.csv [m2.csv ...] --out fig.png

The output format follows the file suffix (png, svg, pdf). Malformed
or empty inputs exit nonzero with a message on stderr.
"""

from __future__ import annotations

import argparse
import sys


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="reachviz")
    sub = parser.add_subparsers(dest="command", required=True)

    p_kernel = sub.add_parser("kernel", help="feasible-set map from grid CSVs")
    p_kernel.add_argument("--grid", action="append", required=True,
                          help="value-grid CSV; repeat for a multi-panel figure")
    p_kernel.add_argument("--overlay", action="append", default=[],
                          help="grid CSV drawn as a dashed contour on every panel")
    p_kernel.add_argument("--title", action="append", default=None,
                          help="panel title; repeat to match --grid")
    p_kernel.add_argument("--out", required=True)

    p_train = sub.add_parser("training", help="training curves from metrics CSVs")
    p_train.add_argument("--metrics", nargs="+", required=True)
    p_train.add_argument("--label", default=None)
    p_train.add_argument("--out", required=True)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    from . import plots

    try:
        if args.command == "kernel":
            plots.plot_kernel(args.grid, args.out, overlay_paths=args.overlay,
                              titles=args.title)
        else:
            plots.plot_training(args.metrics, args.out, label=args.label)
    except (OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    print(args.out)
    return 0


if __name__ == "__main__":
    sys.exit(main())

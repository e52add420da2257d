"""Command line: render sweep figures.

    serene-plot --fig fig3a --in runs.csv --out fig3a.svg
    serene-plot --all --in-dir results/ --out-dir figs/

Exit codes: 0 success, 1 usage error, 2 I/O or schema error.
"""

from __future__ import annotations

import argparse
import sys

from .data import SchemaError
from .figures import FIGURES, FigureSpec, render, render_all


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"error: {message}", file=sys.stderr)
        raise SystemExit(1)


def main(argv=None) -> int:
    parser = _Parser(prog="serene-plot", description=__doc__)
    parser.add_argument("--fig", choices=sorted(FIGURES), help="figure family to render")
    parser.add_argument("--in", dest="inputs", action="append", metavar="runs.csv",
                        help="input CSV (repeatable)")
    parser.add_argument("--out", metavar="FILE", help="output image (.svg)")
    parser.add_argument("--all", action="store_true", help="render every family")
    parser.add_argument("--in-dir", metavar="DIR", help="sweep directory containing runs.csv")
    parser.add_argument("--out-dir", metavar="DIR", help="output directory for --all")
    parser.add_argument("--pc", type=float, default=0.5,
                        help="collusion probability slice for fig5a")
    args = parser.parse_args(argv)

    options = {"pc": args.pc}
    try:
        if args.all:
            if not args.in_dir or not args.out_dir:
                parser.error("--all requires --in-dir and --out-dir")
            outputs = render_all(args.in_dir, args.out_dir, options)
            for path in outputs:
                print(path)
            return 0
        if not args.fig or not args.inputs or not args.out:
            parser.error("need --fig, --in and --out (or --all)")
        out = render(FigureSpec(args.fig, args.inputs, args.out, options))
        print(out)
        return 0
    except SchemaError as exc:
        print(f"schema error: {exc}", file=sys.stderr)
        return 2
    except (OSError, FileNotFoundError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())

"""Command line front end: ``plotkit render --recipe FILE --out PATH``."""

from __future__ import annotations

import argparse
import sys

from .render import EmptyInput, SchemaMismatch, load_recipe, render


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="plotkit", description="render experiment CSVs into figures")
    sub = parser.add_subparsers(dest="command", required=True)
    p = sub.add_parser("render", help="draw one recipe to an image file")
    p.add_argument("--recipe", required=True, help="recipe JSON file")
    p.add_argument("--out", required=True, help="output image path")
    return parser


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        report = render(load_recipe(args.recipe), args.out)
    except (SchemaMismatch, EmptyInput, FileNotFoundError) as exc:
        print(f"plotkit: {exc}", file=sys.stderr)
        return 2
    print(f"{report.path}  x={report.xlim}  y={report.ylim}  "
          f"series={report.n_series}")
    return 0


if __name__ == "__main__":
    sys.exit(main())

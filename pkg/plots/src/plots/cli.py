"""plots command-line entry point: ``plots render --spec figure.json``."""

from __future__ import annotations

import argparse
import sys

from .render import FigureSpecError, load_figure_spec, render


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="plots",
                                     description="Render qwqkd comparison figures")
    sub = parser.add_subparsers(dest="command", required=True)
    p = sub.add_parser("render", help="render one figure from a spec file")
    p.add_argument("--spec", required=True, help="figure spec JSON")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        result = render(load_figure_spec(args.spec))
    except (FigureSpecError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    print(result.output)
    return 0


if __name__ == "__main__":
    sys.exit(main())

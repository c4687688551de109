"""`masched-report render --csv results.csv --out figs/`"""

from __future__ import annotations

import argparse
import sys

from .frame import ReportError, load_frame
from .render import render


class _ArgumentParser(argparse.ArgumentParser):
    def error(self, message):
        self.exit(1, f"{self.prog}: error: {message}\n")


def build_parser():
    parser = _ArgumentParser(
        prog="masched-report",
        description="Render masched results CSVs into SVG charts and a "
                    "Markdown summary.",
    )
    subs = parser.add_subparsers(dest="command")
    sub = subs.add_parser("render", help="render charts and summary")
    sub.add_argument("--csv", required=True, help="results CSV")
    sub.add_argument("--out", required=True, help="output directory")
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return 0 if exc.code in (0, None) else 1
    if args.command != "render":
        parser.print_help()
        return 1
    try:
        frame = load_frame(args.csv)
    except ReportError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    result = render(frame, args.out)
    for name in result.files:
        print(f"wrote {args.out}/{name}")
    flagged = [e for e in result.overlap
               if e.max_above_uniform or e.min_below_uniform]
    print(f"{len(result.overlap)} policy/instance pairs, "
          f"{len(flagged)} with a CI separated from uniform")
    return 0


if __name__ == "__main__":
    sys.exit(main())

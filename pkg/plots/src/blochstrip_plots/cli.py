"""Command line: blochstrip-render --kind K --in PATHS --out PNG."""

from __future__ import annotations

import argparse
import sys

from .render import KINDS, render_job


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="blochstrip-render",
        description="Render figures from blochstrip CSV/JSON artifacts.")
    parser.add_argument("--kind", required=True, choices=KINDS)
    parser.add_argument("--in", dest="inputs", required=True, nargs="+",
                        help="input artifact paths (CSV/JSON as documented per kind)")
    parser.add_argument("--out", required=True, help="output PNG path")
    args = parser.parse_args(argv)
    try:
        render_job(args.kind, args.inputs, args.out)
    except Exception as exc:
        print(f"render failed: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())

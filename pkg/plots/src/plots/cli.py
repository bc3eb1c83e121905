"""Command line entry point: `plots <kind> --in data.csv [--in more.csv]
--out fig.png [--title T]`. Exits nonzero with a message on schema mismatch
or empty data."""

from __future__ import annotations

import argparse
import sys

from . import RENDERERS, PlotsError


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="plots",
                                 description="render figures from experiment CSV outputs")
    ap.add_argument("kind", choices=sorted(RENDERERS))
    ap.add_argument("--in", dest="inputs", action="append", required=True,
                    metavar="CSV", help="input CSV (repeatable for overlays)")
    ap.add_argument("--out", required=True, help="output image path")
    ap.add_argument("--title", default=None)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        RENDERERS[args.kind](args.inputs, args.out, title=args.title)
    except PlotsError as e:
        print(f"plots: error: {e}", file=sys.stderr)
        return 2
    print(args.out)
    return 0


if __name__ == "__main__":
    sys.exit(main())

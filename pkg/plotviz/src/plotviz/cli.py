"""plotviz command line: render figures from exported run directories.

Exit codes: 0 success, 2 bad usage, 4 missing or malformed data files.
"""

from __future__ import annotations

import argparse
import sys

from .data import PlotDataError
from .render import render_convergence, render_swingup

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_DATA = 4

_RENDERERS = {"swingup": render_swingup, "convergence": render_convergence}


def main(argv=None):
    ap = argparse.ArgumentParser(
        prog="plotviz",
        description="render figures from exported solver run data")
    sub = ap.add_subparsers(dest="verb", required=True)
    p = sub.add_parser("render", help="render one figure kind")
    p.add_argument("kind", choices=sorted(_RENDERERS))
    p.add_argument("path", help="run or comparison directory")
    p.add_argument("out", help="output image path")
    args = ap.parse_args(argv)

    try:
        out = _RENDERERS[args.kind](args.path, args.out)
    except PlotDataError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_DATA
    print(f"wrote {out}")
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())

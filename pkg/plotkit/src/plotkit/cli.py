"""Command line for rendering snapshot directories.

    polsim-plot render RUN_DIR --field E --out panels.png
    polsim-plot render RUN_DIR --field psi_q --out panels.png \
        --trajectory RUN_DIR/trajectory_00.dat
"""

from __future__ import annotations

import argparse
import sys
from typing import List, Optional

from plotkit.render import overlay_trajectories, render_panels
from plotkit.snapshots import PlotkitError


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="polsim-plot", description="render polsim snapshots")
    sub = parser.add_subparsers(dest="command", required=True)
    p = sub.add_parser("render", help="multi-panel |field| heatmaps from a run directory")
    p.add_argument("rundir")
    p.add_argument("--field", default="E", help="snapshot field to render (default E)")
    p.add_argument("--out", required=True, help="output raster image path")
    p.add_argument("--trajectory", action="append", default=[],
                   help="trajectory file to overlay; repeatable")
    p.add_argument("--columns", type=int, default=4)
    p.add_argument("--dpi", type=int, default=130)
    return parser


def cli(argv: Optional[List[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code) if exc.code is not None else 0
    try:
        if args.trajectory:
            out = overlay_trajectories(
                args.rundir, args.field, args.trajectory, args.out,
                columns=args.columns, dpi=args.dpi,
            )
        else:
            out = render_panels(
                args.rundir, args.field, args.out, columns=args.columns, dpi=args.dpi
            )
        print(out)
        return 0
    except PlotkitError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


def main() -> None:
    sys.exit(cli())


if __name__ == "__main__":
    main()

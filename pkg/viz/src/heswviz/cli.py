"""hesw-viz: render figures from a run directory's files."""

import argparse
import sys

from . import __version__, formats, plots

EXIT_OK = 0
EXIT_ERROR = 1


def _build_parser():
    parser = argparse.ArgumentParser(
        prog="hesw-viz",
        description="Figure rendering for solver run directories.")
    parser.add_argument("--version", action="version",
                        version=f"hesw-viz {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("surface", help="elevation waterfall from snapshots")
    p.add_argument("run_dir")
    p.add_argument("out_image")

    p = sub.add_parser("drift", help="energy drift curve from the CSV")
    p.add_argument("csv_path")
    p.add_argument("out_image")

    p = sub.add_parser("spectrum", help="mode-magnitude evolution")
    p.add_argument("run_dir")
    p.add_argument("out_image")

    p = sub.add_parser("strichartz", help="running dispersive norm")
    p.add_argument("csv_path")
    p.add_argument("out_image")

    p = sub.add_parser("all", help="every figure into one directory")
    p.add_argument("run_dir")
    p.add_argument("out_dir")
    return parser


def _jobs_for(args):
    if args.command == "all":
        run, out = args.run_dir, args.out_dir
        csv_path = f"{run}/diagnostics.csv"
        return [
            plots.PlotJob((run,), "surface", f"{out}/surface_waterfall.png"),
            plots.PlotJob((csv_path,), "drift", f"{out}/energy_drift.png"),
            plots.PlotJob((run,), "spectrum", f"{out}/spectrum_evolution.png"),
            plots.PlotJob((csv_path,), "strichartz",
                          f"{out}/strichartz_norm.png"),
        ]
    source = args.run_dir if args.command in ("surface", "spectrum") \
        else args.csv_path
    return [plots.PlotJob((source,), args.command, args.out_image)]


def main(argv=None) -> int:
    try:
        args = _build_parser().parse_args(argv)
    except SystemExit as exc:
        # argparse exits 2 on usage problems and 0 for --help/--version
        if exc.code in (None, 0):
            raise
        return EXIT_ERROR

    for job in _jobs_for(args):
        try:
            path = job.run()
        except (formats.FormatError, OSError) as exc:
            print(f"hesw-viz {args.command}: {exc}", file=sys.stderr)
            return EXIT_ERROR
        print(f"wrote {path}")
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())

"""Command-line front end.

Subcommands: simulate (run a config, write manifest + snapshots +
diagnostics, optionally figures), verify (seeded check batteries with a
JSON report), dtn (one-shot trace computation on plain text fields) and
report (render figures for a finished run directory).

Exit codes: 0 success, 1 usage/config/format trouble, 2 numerical
failure, 3 the L2 guard tripped.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from . import __version__, diagnostics, dtn, evolution, formats
from .config import ConfigError, RunConfig, load_config
from .elliptic import EllipticError
from .spectral import Grid

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_NUMERICAL = 2
EXIT_GUARD = 3

_NUMERICAL_ERRORS = (EllipticError, dtn.DtnInversionError, evolution.PicardError,
                     FloatingPointError)


class _Parser(argparse.ArgumentParser):
    """argparse exits 2 on usage errors; the contract reserves 2 for
    numerical failures, so route usage trouble to exit 1."""

    def error(self, message):
        self.print_usage(sys.stderr)
        raise _UsageExit(EXIT_USAGE, f"{self.prog}: error: {message}")


class _UsageExit(Exception):
    def __init__(self, code, message=None):
        super().__init__(message or "")
        self.code = code
        self.message = message


def _build_parser() -> _Parser:
    parser = _Parser(prog="hesw", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"hesw {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p_sim = sub.add_parser("simulate", help="run a configured trajectory")
    p_sim.add_argument("config", help="path to an INI run config")
    p_sim.add_argument("--out", help="override the configured output directory")
    p_sim.add_argument("--figures", action="store_true",
                       help="also render the standard figures")

    p_ver = sub.add_parser("verify", help="run a seeded verification battery")
    p_ver.add_argument("suite", choices=["dtn", "paradiff", "identities",
                                         "evolution", "all"])
    p_ver.add_argument("--n", type=int, default=128)
    p_ver.add_argument("--seed", type=int, default=0)
    p_ver.add_argument("--tol", type=float, default=1.0,
                       help="uniform threshold scale; 1.0 is the contract")
    p_ver.add_argument("--json", dest="json_path",
                       help="where to write the JSON report "
                            "(default verify_<suite>.json)")

    p_dtn = sub.add_parser("dtn", help="apply the surface trace operator once")
    p_dtn.add_argument("eta_file", help="surface elevation, one number per line")
    p_dtn.add_argument("psi_file", help="boundary data, one number per line")
    p_dtn.add_argument("out_file", help="where to write G(eta) psi")
    p_dtn.add_argument("--length", type=float, default=2.0 * np.pi)
    p_dtn.add_argument("--depth", type=float, default=dtn.DEFAULT_DEPTH)
    p_dtn.add_argument("--nz", type=int, default=dtn.DEFAULT_NZ)

    p_rep = sub.add_parser("report", help="render figures for a finished run")
    p_rep.add_argument("run_dir", help="directory written by simulate")
    p_rep.add_argument("--out", help="figure directory (default RUN_DIR/figures)")
    return parser


# ---------------------------------------------------------------------------
# simulate

def _write_outputs(out_dir: Path, config: RunConfig, traj) -> None:
    out_dir.mkdir(parents=True, exist_ok=True)
    formats.write_manifest(out_dir / "manifest.json", config)
    for idx, state in enumerate(traj.states):
        formats.write_snapshot(out_dir / f"snapshot_{idx:06d}.bin",
                               state.t, state.eta, state.u)
    formats.write_diagnostics_csv(out_dir / "diagnostics.csv", traj.rows)


def cmd_simulate(args) -> int:
    try:
        config = load_config(args.config)
    except ConfigError as exc:
        print(f"hesw simulate: {exc}", file=sys.stderr)
        return EXIT_USAGE
    out_dir = Path(args.out) if args.out else Path(config.out_dir)

    code = EXIT_OK
    try:
        traj = evolution.simulate(config)
    except evolution.GuardError as exc:
        print(f"hesw simulate: {exc}", file=sys.stderr)
        traj = getattr(exc, "trajectory", None)
        if traj is None:
            return EXIT_GUARD
        code = EXIT_GUARD
    except _NUMERICAL_ERRORS as exc:
        print(f"hesw simulate: solver failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except ValueError as exc:
        print(f"hesw simulate: {exc}", file=sys.stderr)
        return EXIT_USAGE

    _write_outputs(out_dir, config, traj)
    drift, _ = diagnostics.conservation_drift(traj)
    print(f"wrote {len(traj.states)} snapshots and {len(traj.rows)} "
          f"diagnostics rows to {out_dir}")
    print(f"final t = {traj.states[-1].t:.6g}, max energy drift = {drift:.3e}"
          + (", ABORTED by guard" if traj.aborted else ""))
    if args.figures and code == EXIT_OK:
        render_figures(out_dir, out_dir / "figures")
        print(f"figures in {out_dir / 'figures'}")
    return code


# ---------------------------------------------------------------------------
# verify

def cmd_verify(args) -> int:
    try:
        report = diagnostics.verify_suite(args.suite, n=args.n, seed=args.seed,
                                          tol=args.tol)
    except ValueError as exc:
        print(f"hesw verify: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except _NUMERICAL_ERRORS as exc:
        print(f"hesw verify: solver failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL

    for check in report.checks:
        flag = "ok  " if check.passed else "FAIL"
        print(f"{flag} {check.name:28s} {check.value:.6e} <= {check.threshold:.6e}")
    verdict = "pass" if report.passed else "FAIL"
    print(f"suite {report.suite}: {verdict} "
          f"({sum(c.passed for c in report.checks)}/{len(report.checks)} checks, "
          f"n={report.n}, seed={report.seed})")

    json_path = Path(args.json_path or f"verify_{args.suite}.json")
    json_path.write_text(json.dumps(report.to_dict(), indent=2, sort_keys=True)
                         + "\n")
    return EXIT_OK if report.passed else EXIT_NUMERICAL


# ---------------------------------------------------------------------------
# one-shot trace

def cmd_dtn(args) -> int:
    try:
        eta = formats.read_field_text(args.eta_file)
        psi = formats.read_field_text(args.psi_file)
    except formats.FormatError as exc:
        print(f"hesw dtn: {exc}", file=sys.stderr)
        return EXIT_USAGE
    if eta.size != psi.size:
        print(f"hesw dtn: eta has {eta.size} samples but psi has {psi.size}",
              file=sys.stderr)
        return EXIT_USAGE
    try:
        grid = Grid(eta.size, args.length)
        result = dtn.dtn_apply(grid, eta, psi, depth=args.depth, nz=args.nz)
    except ValueError as exc:
        print(f"hesw dtn: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except _NUMERICAL_ERRORS as exc:
        print(f"hesw dtn: solver failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    formats.write_field_text(args.out_file, result.g_psi)
    print(f"wrote G(eta) psi to {args.out_file} "
          f"(residual {result.residual:.3e}, {result.iterations} iterations)")
    return EXIT_OK


# ---------------------------------------------------------------------------
# figures

def _load_run(run_dir: Path):
    snaps = sorted(run_dir.glob("snapshot_*.bin"))
    if not snaps:
        raise formats.FormatError(f"{run_dir}: no snapshot files")
    times, etas, us = [], [], []
    for snap in snaps:
        t, eta, u = formats.read_snapshot(snap)
        times.append(t)
        etas.append(eta)
        us.append(u)
    rows = formats.read_diagnostics_csv(run_dir / "diagnostics.csv")
    return np.array(times), np.array(etas), np.array(us), rows


def render_figures(run_dir, fig_dir) -> list:
    """Render the standard figure set from a run directory's files.

    Reads only the on-disk formats, so the output is reproducible from a
    run directory alone.  Returns the list of files written.
    """
    import matplotlib
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    run_dir, fig_dir = Path(run_dir), Path(fig_dir)
    times, etas, _, rows = _load_run(run_dir)
    fig_dir.mkdir(parents=True, exist_ok=True)
    manifest = formats.read_manifest(run_dir / "manifest.json")
    length = manifest["config"]["length"]
    x = np.arange(etas.shape[1]) * (length / etas.shape[1])
    written = []

    fig, ax = plt.subplots(figsize=(7, 4))
    mesh = ax.pcolormesh(x, times, etas, shading="nearest", cmap="RdBu_r")
    fig.colorbar(mesh, ax=ax, label="eta")
    ax.set_xlabel("x")
    ax.set_ylabel("t")
    ax.set_title("surface elevation")
    path = fig_dir / "surface_waterfall.png"
    fig.savefig(path, dpi=130, bbox_inches="tight")
    plt.close(fig)
    written.append(path)

    t_rows = np.array([row.t for row in rows])
    energies = np.array([row.energy for row in rows])
    fig, ax = plt.subplots(figsize=(7, 4))
    if energies[0] > 0:
        drift = np.abs(energies - energies[0]) / energies[0]
        ax.semilogy(t_rows, np.maximum(drift, 1e-18), marker=".")
        ax.set_ylabel("|E(t)-E(0)| / E(0)")
    else:
        ax.plot(t_rows, energies, marker=".")
        ax.set_ylabel("E(t)")
    ax.set_xlabel("t")
    ax.set_title("energy drift")
    path = fig_dir / "energy_drift.png"
    fig.savefig(path, dpi=130, bbox_inches="tight")
    plt.close(fig)
    written.append(path)

    spectra = np.abs(np.fft.rfft(etas, axis=1)) / etas.shape[1]
    fig, ax = plt.subplots(figsize=(7, 4))
    mesh = ax.pcolormesh(np.arange(spectra.shape[1]), times,
                         np.log10(np.maximum(spectra, 1e-18)),
                         shading="nearest", cmap="viridis")
    fig.colorbar(mesh, ax=ax, label="log10 |eta_k|")
    ax.set_xlabel("mode index")
    ax.set_ylabel("t")
    ax.set_title("spectrum evolution")
    path = fig_dir / "spectrum_evolution.png"
    fig.savefig(path, dpi=130, bbox_inches="tight")
    plt.close(fig)
    written.append(path)

    y0 = np.array([row.y0_U for row in rows])
    accum = np.zeros_like(t_rows)
    for i in range(1, t_rows.size):
        accum[i] = accum[i - 1] + 0.5 * (y0[i] ** 4 + y0[i - 1] ** 4) \
            * (t_rows[i] - t_rows[i - 1])
    fig, ax = plt.subplots(figsize=(7, 4))
    ax.plot(t_rows, accum ** 0.25, marker=".")
    ax.set_xlabel("T")
    ax.set_ylabel("(int_0^T ||U||_{Y0}^4 dt)^{1/4}")
    ax.set_title("space-time norm growth")
    path = fig_dir / "strichartz_norm.png"
    fig.savefig(path, dpi=130, bbox_inches="tight")
    plt.close(fig)
    written.append(path)
    return written


def cmd_report(args) -> int:
    run_dir = Path(args.run_dir)
    fig_dir = Path(args.out) if args.out else run_dir / "figures"
    try:
        written = render_figures(run_dir, fig_dir)
    except (formats.FormatError, OSError) as exc:
        print(f"hesw report: {exc}", file=sys.stderr)
        return EXIT_USAGE
    for path in written:
        print(f"wrote {path}")
    return EXIT_OK


_COMMANDS = {
    "simulate": cmd_simulate,
    "verify": cmd_verify,
    "dtn": cmd_dtn,
    "report": cmd_report,
}


def main(argv=None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except _UsageExit as exc:
        if exc.message:
            print(exc.message, file=sys.stderr)
        return exc.code
    return _COMMANDS[args.command](args)


if __name__ == "__main__":
    sys.exit(main())

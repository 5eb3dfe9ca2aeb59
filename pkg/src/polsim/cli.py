"""Command-line entry points composing engines and diagnostics into runs.

Subcommands:

    run <config> --out DIR            finite-difference run -> snapshots + manifest
    characteristics <config> --out DIR  closed-form fields, storage plane,
                                        trajectories, extent, feasibility
    compare <dirA> <dirB>             per-time L2/Linf differences
    widths <dir>                      geometry verification report

Everything a run writes is reproducible from the config echo in its
output directory; snapshot trees from identical configs are
byte-identical.  Progress goes to standard error.
"""

from __future__ import annotations

import argparse
import sys
import time
from pathlib import Path
from typing import List, Optional

import numpy as np

import polsim
from polsim.characteristics import (
    CharacteristicsError,
    build_characteristic_map,
    fields_on_grid,
    find_z_infinity,
    spin_wave_extent,
    storage_feasibility,
    trace_trajectory,
)
from polsim.config import RunConfig, parse_config, serialize_config
from polsim.core import FieldGrid, PolsimError
from polsim.diagnostics import verify_geometry
from polsim.snapshots import (
    read_field,
    read_snapshot,
    scan_directory,
    write_field,
    write_snapshot,
)
from polsim import solver as solver_mod

TRAJECTORY_MAGIC = "# polsim-trajectory v1"


def _num(value: float) -> str:
    return "0" if value == 0 else repr(float(value))


def _load_config(path: str) -> RunConfig:
    p = Path(path)
    if not p.exists():
        raise PolsimError(f"config file not found: {path}")
    return parse_config(p.read_text(encoding="utf-8"))


def _write_manifest(outdir: Path, cfg: RunConfig, seconds: float, n_snapshots: int) -> None:
    lines = [
        f"polsim.version={polsim.__version__}",
        f"numpy.version={np.__version__}",
        f"format.version={cfg.format_version}",
        f"config.echo=config_echo.cfg",
        f"snapshot.count={n_snapshots}",
        f"timing.seconds={seconds:.3f}",
    ]
    (outdir / "manifest.txt").write_text("\n".join(lines) + "\n", encoding="utf-8")
    (outdir / "config_echo.cfg").write_text(serialize_config(cfg), encoding="utf-8")


def _cmd_run(args) -> int:
    cfg = _load_config(args.config)
    outdir = Path(args.out) if args.out else Path(cfg.out_directory)
    outdir.mkdir(parents=True, exist_ok=True)
    spec = cfg.build_medium()
    probe = cfg.build_probe()
    grid = cfg.build_grid()
    solver_cfg = cfg.build_solver_config()

    def progress(t_now: float, t_end: float) -> None:
        print(f"run: t = {t_now:g} / {t_end:g}", file=sys.stderr)

    started = time.perf_counter()
    snapshots = solver_mod.run(solver_cfg, spec, probe, grid, progress=progress)
    for snap in snapshots:
        write_snapshot(snap, outdir, spec=spec)
    _write_manifest(outdir, cfg, time.perf_counter() - started, len(snapshots))
    print(f"wrote {len(snapshots)} snapshots to {outdir}", file=sys.stderr)
    return 0


def write_trajectory(points: np.ndarray, xi0: float, path: Path) -> None:
    lines = [TRAJECTORY_MAGIC, f"# xi0={_num(xi0)}"]
    lines.extend(f"{_num(float(x))} {_num(float(z))}" for x, z in points)
    path.write_text("\n".join(lines) + "\n", encoding="ascii")


def read_trajectory(path: Path):
    text = Path(path).read_text(encoding="ascii").splitlines()
    if not text or text[0] != TRAJECTORY_MAGIC:
        raise PolsimError(f"{path}: not a polsim trajectory file")
    if len(text) < 2 or not text[1].startswith("# xi0="):
        raise PolsimError(f"{path}: missing xi0 header")
    xi0 = float(text[1].split("=", 1)[1])
    pts = [tuple(map(float, line.split())) for line in text[2:] if line.strip()]
    return xi0, np.asarray(pts)


def _cmd_characteristics(args) -> int:
    cfg = _load_config(args.config)
    outdir = Path(args.out) if args.out else Path(cfg.out_directory)
    outdir.mkdir(parents=True, exist_ok=True)
    spec = cfg.build_medium()
    probe = cfg.build_probe()
    grid = cfg.build_grid()
    cmap = build_characteristic_map(spec, grid.x0, grid.x_max, grid.z0, grid.z_max)

    times = solver_mod.snapshot_times(cfg.t_end, cfg.snapshot_every)
    x_nodes, z_nodes = grid.x_nodes(), grid.z_nodes()
    for t in times:
        fields = fields_on_grid(t, x_nodes, z_nodes, probe, cmap, spec)
        for name in ("E", "psi_q", "E_tilde"):
            g = grid.zeros_like()
            g.values = fields[name].astype(complex)
            write_field(g, t, name, outdir)
        print(f"characteristics: t = {t:g} / {times[-1]:g}", file=sys.stderr)

    report: List[str] = []
    feas = storage_feasibility(probe, grid.z_max - grid.z0, cmap, spec)
    report.append(f"storage.margin={feas.margin!r}")
    report.append(f"storage.classification={feas.classification}")
    try:
        z_inf = find_z_infinity(cmap)
        report.append(f"z_infinity={z_inf!r}")
        extent = spin_wave_extent(probe, cmap, spec)
        report.append(f"spin_wave.dx={extent.dx_s!r}")
        report.append(f"spin_wave.dz={extent.dz_s!r}")
    except CharacteristicsError as exc:
        report.append(f"z_infinity.error={exc}")
    if spec.control2 is not None and spec.control2.amplitude > 0:
        from polsim.characteristics import retrieved_width

        report.append(f"retrieved_width={retrieved_width(probe.x_halfwidth, spec)!r}")
    (outdir / "characteristics.txt").write_text("\n".join(report) + "\n", encoding="utf-8")

    xi0_values = [float(v) for v in (args.xi0 or ["0"])]
    for k, xi0 in enumerate(xi0_values):
        pts = trace_trajectory(xi0, cmap)
        write_trajectory(pts, xi0, outdir / f"trajectory_{k:02d}.dat")
    _write_manifest(outdir, cfg, 0.0, len(times))
    print(f"wrote characteristics fields and {len(xi0_values)} trajectories to {outdir}", file=sys.stderr)
    return 0


def _cmd_compare(args) -> int:
    a_by_time = scan_directory(Path(args.dir_a))
    b_by_time = scan_directory(Path(args.dir_b))
    common_times = sorted(set(a_by_time) & set(b_by_time))
    if not common_times:
        raise PolsimError("no common snapshot times to compare")
    sum_sq_diff: dict = {}
    sum_sq_ref: dict = {}
    for t in common_times:
        for name in sorted(set(a_by_time[t]) & set(b_by_time[t])):
            fa = read_field(a_by_time[t][name])
            fb = read_field(b_by_time[t][name])
            if fa.grid.values.shape != fb.grid.values.shape:
                raise PolsimError(f"grid shapes differ for field {name} at t = {t:g}")
            diff = fa.grid.values - fb.grid.values
            w = fa.grid.dx * fa.grid.dz
            l2_diff = float(np.sqrt(np.sum(np.abs(diff) ** 2) * w))
            l2_ref = float(np.sqrt(np.sum(np.abs(fb.grid.values) ** 2) * w))
            linf = float(np.max(np.abs(diff)))
            rel = l2_diff / l2_ref if l2_ref > 0 else float("inf") if l2_diff > 0 else 0.0
            print(f"t={t:g} field={name} l2_diff={l2_diff:.6e} l2_rel={rel:.6e} linf={linf:.6e}")
            sum_sq_diff[name] = sum_sq_diff.get(name, 0.0) + l2_diff**2
            sum_sq_ref[name] = sum_sq_ref.get(name, 0.0) + l2_ref**2
    for name in sorted(sum_sq_diff):
        denom = np.sqrt(sum_sq_ref[name])
        rel = np.sqrt(sum_sq_diff[name]) / denom if denom > 0 else float("inf")
        print(f"aggregate field={name} l2_rel={rel:.6e}")
    return 0


def _cmd_widths(args) -> int:
    rundir = Path(args.rundir)
    echo = rundir / "config_echo.cfg"
    if not echo.exists():
        raise PolsimError(f"{rundir} has no config_echo.cfg; not a run directory")
    cfg = parse_config(echo.read_text(encoding="utf-8"))
    spec = cfg.build_medium()
    probe = cfg.build_probe()
    grid = cfg.build_grid()
    cmap = build_characteristic_map(spec, grid.x0, grid.x_max, grid.z0, grid.z_max)
    by_time = scan_directory(rundir)
    if not by_time:
        raise PolsimError(f"no snapshots in {rundir}")
    snapshots = [read_snapshot(rundir, t) for t in sorted(by_time)]
    dz_atom = args.dz_atom if args.dz_atom is not None else (grid.z_max - grid.z0)
    report = verify_geometry(snapshots, probe, cmap, spec, dz_atom)
    print(report.to_text())
    print()
    print(report.to_keyvalues())
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="polsim",
        description="slow-light storage/retrieval simulator: runs, closed-form fields, comparisons",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="finite-difference run from a config file")
    p_run.add_argument("config")
    p_run.add_argument("--out", help="output directory (default: [output] directory)")
    p_run.set_defaults(func=_cmd_run)

    p_char = sub.add_parser("characteristics", help="closed-form fields and storage geometry")
    p_char.add_argument("config")
    p_char.add_argument("--out", help="output directory (default: [output] directory)")
    p_char.add_argument("--xi0", action="append", help="trajectory level(s); repeatable (default 0)")
    p_char.set_defaults(func=_cmd_characteristics)

    p_cmp = sub.add_parser("compare", help="per-time L2/Linf differences between snapshot trees")
    p_cmp.add_argument("dir_a")
    p_cmp.add_argument("dir_b")
    p_cmp.set_defaults(func=_cmd_compare)

    p_w = sub.add_parser("widths", help="geometry verification report for a run directory")
    p_w.add_argument("rundir")
    p_w.add_argument("--dz-atom", type=float, default=None, dest="dz_atom",
                     help="atomic beam half-height (default: z window height)")
    p_w.set_defaults(func=_cmd_widths)
    return parser


def cli(argv: Optional[List[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code) if exc.code is not None else 0
    try:
        return args.func(args)
    except PolsimError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


def main() -> None:
    sys.exit(cli())


if __name__ == "__main__":
    main()

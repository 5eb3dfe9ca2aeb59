"""Versioned text snapshots: one file per field per time, bit-exact round trip.

Format v1:

    # polsim-snapshot v1
    # t=<decimal>
    # field=E|psi_e|psi_q|E_tilde
    # nx=<int> dx=<decimal> x0=<decimal>
    # nz=<int> dz=<decimal> z0=<decimal>
    <re> <im>          (nx*nz lines, z-major: z varies fastest)

Numbers are written with shortest round-trip precision; zero is the
canonical "0".  Reading back and rewriting reproduces the file byte for
byte.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from pathlib import Path
from typing import Dict, List, Optional

import numpy as np

from polsim.core import ADVECTION, FULL_MB, FieldGrid, PolsimError, SolverState
from polsim.medium import MediumSpec
from polsim.solver import physical_probe_field

MAGIC = "# polsim-snapshot v1"
FIELD_NAMES = ("E", "psi_e", "psi_q", "E_tilde")


class SnapshotError(PolsimError):
    """Base class for snapshot format problems."""


class SnapshotVersionError(SnapshotError):
    """File does not announce format v1."""


class SnapshotTruncatedError(SnapshotError):
    """File ends before the payload announced in the header."""


class SnapshotCountError(SnapshotError):
    """Header and payload disagree on the number of data lines."""


def _num(value: float) -> str:
    return "0" if value == 0 else repr(float(value))


def snapshot_filename(t: float, field_name: str) -> str:
    return f"snap_t{t:015.9f}_{field_name}.dat"


def write_field(grid: FieldGrid, t: float, field_name: str, directory: Path) -> Path:
    """Write one field at one time; returns the created file path."""
    if field_name not in FIELD_NAMES:
        raise SnapshotError(f"unknown field name {field_name!r}")
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    path = directory / snapshot_filename(t, field_name)
    flat = grid.values.reshape(-1)
    lines = [
        MAGIC,
        f"# t={_num(t)}",
        f"# field={field_name}",
        f"# nx={grid.nx} dx={_num(grid.dx)} x0={_num(grid.x0)}",
        f"# nz={grid.nz} dz={_num(grid.dz)} z0={_num(grid.z0)}",
    ]
    lines.extend(f"{_num(v.real)} {_num(v.imag)}" for v in flat)
    path.write_text("\n".join(lines) + "\n", encoding="ascii")
    return path


_HEADER_T = re.compile(r"^# t=(\S+)$")
_HEADER_FIELD = re.compile(r"^# field=(\S+)$")
_HEADER_X = re.compile(r"^# nx=(\d+) dx=(\S+) x0=(\S+)$")
_HEADER_Z = re.compile(r"^# nz=(\d+) dz=(\S+) z0=(\S+)$")


@dataclass
class FieldSnapshot:
    t: float
    field_name: str
    grid: FieldGrid


def read_field(path: Path) -> FieldSnapshot:
    """Parse one snapshot file, validating version, header and payload."""
    path = Path(path)
    with path.open("r", encoding="ascii") as fh:
        first = fh.readline().rstrip("\n")
        if first != MAGIC:
            raise SnapshotVersionError(f"{path.name}: version mismatch (got {first!r})")

        def header(pattern, what):
            line = fh.readline()
            if not line:
                raise SnapshotTruncatedError(f"{path.name}: truncated header (missing {what})")
            m = pattern.match(line.rstrip("\n"))
            if not m:
                raise SnapshotError(f"{path.name}: malformed {what} header: {line.rstrip()!r}")
            return m.groups()

        (t_text,) = header(_HEADER_T, "time")
        (field_name,) = header(_HEADER_FIELD, "field")
        if field_name not in FIELD_NAMES:
            raise SnapshotError(f"{path.name}: unknown field {field_name!r}")
        nx_text, dx_text, x0_text = header(_HEADER_X, "x-axis")
        nz_text, dz_text, z0_text = header(_HEADER_Z, "z-axis")
        try:
            t = float(t_text)
            nx, dx, x0 = int(nx_text), float(dx_text), float(x0_text)
            nz, dz, z0 = int(nz_text), float(dz_text), float(z0_text)
        except ValueError as exc:
            raise SnapshotError(f"{path.name}: bad header number: {exc}") from None

        expected = nx * nz
        values = np.empty(expected, dtype=complex)
        count = 0
        for line in fh:
            line = line.strip()
            if not line:
                continue
            if count >= expected:
                raise SnapshotCountError(
                    f"{path.name}: payload count exceeds header nx*nz = {expected}"
                )
            parts = line.split()
            if len(parts) != 2:
                raise SnapshotError(f"{path.name}: bad data line {count + 1}: {line!r}")
            try:
                values[count] = complex(float(parts[0]), float(parts[1]))
            except ValueError:
                raise SnapshotError(f"{path.name}: bad data line {count + 1}: {line!r}") from None
            count += 1
        if count < expected:
            raise SnapshotTruncatedError(
                f"{path.name}: truncated payload ({count} of {expected} data lines)"
            )
    grid = FieldGrid(x0=x0, dx=dx, nx=nx, z0=z0, dz=dz, nz=nz, values=values)
    return FieldSnapshot(t=t, field_name=field_name, grid=grid)


def write_snapshot(state: SolverState, directory: Path, spec: Optional[MediumSpec] = None) -> List[Path]:
    """Write all fields of one state.

    Advection states store the auxiliary amplitude; with a medium given
    the physical probe field is written alongside it, so a snapshot
    directory is self-contained for rendering and comparison.
    """
    directory = Path(directory)
    paths = []
    if state.mode == ADVECTION:
        paths.append(write_field(state.E, state.t, "E_tilde", directory))
        if spec is not None:
            phys = state.E.zeros_like()
            phys.values = physical_probe_field(state, spec)
            paths.append(write_field(phys, state.t, "E", directory))
        paths.append(write_field(state.psi_q, state.t, "psi_q", directory))
    else:
        paths.append(write_field(state.E, state.t, "E", directory))
        paths.append(write_field(state.psi_e, state.t, "psi_e", directory))
        paths.append(write_field(state.psi_q, state.t, "psi_q", directory))
    return paths


def scan_directory(directory: Path) -> Dict[float, Dict[str, Path]]:
    """Map time -> field name -> file for every snapshot in a directory."""
    directory = Path(directory)
    out: Dict[float, Dict[str, Path]] = {}
    for path in sorted(directory.glob("snap_t*.dat")):
        m = re.match(r"snap_t([0-9.]+)_([A-Za-z_]+)\.dat$", path.name)
        if not m:
            continue
        t = float(m.group(1))
        out.setdefault(t, {})[m.group(2)] = path
    return out


def read_snapshot(directory: Path, t: Optional[float] = None) -> SolverState:
    """Reassemble a SolverState from a snapshot directory at one time.

    With t omitted the directory must contain exactly one snapshot time.
    The presence of an E_tilde file marks an advection-mode state.
    """
    by_time = scan_directory(directory)
    if not by_time:
        raise SnapshotError(f"no snapshot files found in {directory}")
    if t is None:
        if len(by_time) != 1:
            raise SnapshotError(
                f"{directory} holds {len(by_time)} snapshot times; pass an explicit t"
            )
        t = next(iter(by_time))
    else:
        matches = [key for key in by_time if abs(key - t) < 1e-9]
        if not matches:
            raise SnapshotError(f"no snapshot at t = {t:g} in {directory}")
        t = matches[0]
    fields = {name: read_field(path) for name, path in by_time[t].items()}

    mode = ADVECTION if "E_tilde" in fields else FULL_MB
    main = fields["E_tilde"] if mode == ADVECTION else fields.get("E")
    if main is None:
        raise SnapshotError(f"snapshot at t = {t:g} lacks an E or E_tilde field")
    template = main.grid

    def grid_or_zeros(name: str) -> FieldGrid:
        if name in fields:
            return fields[name].grid
        return template.zeros_like()

    state = SolverState(
        t=main.t,
        E=template,
        psi_e=grid_or_zeros("psi_e"),
        psi_q=grid_or_zeros("psi_q"),
        mode=mode,
    )
    return state

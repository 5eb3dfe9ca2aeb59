"""Readers for the simulator's published text formats.

Snapshot format v1, one field per file:

    # polsim-snapshot v1
    # t=<decimal>
    # field=<name>
    # nx=<int> dx=<decimal> x0=<decimal>
    # nz=<int> dz=<decimal> z0=<decimal>
    <re> <im>      (nx*nz lines, z fastest)

Trajectory files:

    # polsim-trajectory v1
    # xi0=<decimal>
    <x> <z>        (one vertex per line)
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from pathlib import Path
from typing import Dict, List, Tuple

import numpy as np

SNAPSHOT_MAGIC = "# polsim-snapshot v1"
TRAJECTORY_MAGIC = "# polsim-trajectory v1"


class PlotkitError(Exception):
    """Missing, corrupt or inconsistent input files."""


@dataclass
class FieldFile:
    path: Path
    t: float
    field: str
    x0: float
    dx: float
    nx: int
    z0: float
    dz: float
    nz: int
    values: np.ndarray  # (nx, nz) complex

    @property
    def extent(self) -> Tuple[float, float, float, float]:
        """(x_min, x_max, z_min, z_max) of the node lattice."""
        return (
            self.x0,
            self.x0 + (self.nx - 1) * self.dx,
            self.z0,
            self.z0 + (self.nz - 1) * self.dz,
        )


_AXIS_X = re.compile(r"^# nx=(\d+) dx=(\S+) x0=(\S+)$")
_AXIS_Z = re.compile(r"^# nz=(\d+) dz=(\S+) z0=(\S+)$")


def read_field_file(path: Path) -> FieldFile:
    path = Path(path)
    try:
        lines = path.read_text(encoding="ascii").splitlines()
    except OSError as exc:
        raise PlotkitError(f"{path}: unreadable ({exc})") from None
    if not lines or lines[0] != SNAPSHOT_MAGIC:
        raise PlotkitError(f"{path.name}: not a polsim snapshot (bad magic line)")
    if len(lines) < 5:
        raise PlotkitError(f"{path.name}: truncated header")
    try:
        t = float(lines[1].removeprefix("# t="))
        field = lines[2].removeprefix("# field=").strip()
        mx = _AXIS_X.match(lines[3])
        mz = _AXIS_Z.match(lines[4])
        if not (mx and mz):
            raise ValueError("axis header")
        nx, dx, x0 = int(mx.group(1)), float(mx.group(2)), float(mx.group(3))
        nz, dz, z0 = int(mz.group(1)), float(mz.group(2)), float(mz.group(3))
    except ValueError as exc:
        raise PlotkitError(f"{path.name}: malformed header ({exc})") from None
    data = [ln.split() for ln in lines[5:] if ln.strip()]
    if len(data) != nx * nz:
        raise PlotkitError(f"{path.name}: expected {nx * nz} data lines, found {len(data)}")
    try:
        arr = np.array([[float(a), float(b)] for a, b in data])
    except ValueError as exc:
        raise PlotkitError(f"{path.name}: bad data line ({exc})") from None
    values = (arr[:, 0] + 1j * arr[:, 1]).reshape(nx, nz)
    return FieldFile(path=path, t=t, field=field, x0=x0, dx=dx, nx=nx, z0=z0, dz=dz, nz=nz, values=values)


def scan_run(directory: Path) -> Dict[float, Dict[str, Path]]:
    """time -> field -> file map for a snapshot directory."""
    directory = Path(directory)
    if not directory.is_dir():
        raise PlotkitError(f"{directory} is not a directory")
    out: Dict[float, Dict[str, Path]] = {}
    for path in sorted(directory.glob("snap_t*.dat")):
        m = re.match(r"snap_t([0-9.]+)_([A-Za-z_]+)\.dat$", path.name)
        if m:
            out.setdefault(float(m.group(1)), {})[m.group(2)] = path
    if not out:
        raise PlotkitError(f"no snapshot files in {directory}")
    return out


def read_trajectory_file(path: Path) -> Tuple[float, np.ndarray]:
    path = Path(path)
    lines = path.read_text(encoding="ascii").splitlines()
    if not lines or lines[0] != TRAJECTORY_MAGIC:
        raise PlotkitError(f"{path.name}: not a polsim trajectory file")
    if len(lines) < 2 or not lines[1].startswith("# xi0="):
        raise PlotkitError(f"{path.name}: missing xi0 header")
    xi0 = float(lines[1].removeprefix("# xi0="))
    pts: List[Tuple[float, float]] = []
    for ln in lines[2:]:
        if ln.strip():
            a, b = ln.split()
            pts.append((float(a), float(b)))
    return xi0, np.asarray(pts).reshape(-1, 2)

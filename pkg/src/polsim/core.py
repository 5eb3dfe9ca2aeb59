"""Shared domain types: grids, physics constants, solver state.

Fields live on a uniform 2D lattice in the (x, z) plane: x is the
transverse axis (direction of the atomic flow), z the propagation axis
of the probe.  Values are complex amplitudes stored z-major (z varies
fastest) so that z-direction stencils are cache-contiguous; the array
shape is (nx, nz) in C order.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


class PolsimError(Exception):
    """Base class for errors raised by this package."""


class GridError(PolsimError):
    """Invalid grid geometry or out-of-bounds grid query."""


@dataclass
class FieldGrid:
    """Uniform 2D lattice of complex field samples at one instant.

    Node (i, j) sits at (x0 + i*dx, z0 + j*dz); ``values[i, j]`` is the
    amplitude there.
    """

    x0: float
    dx: float
    nx: int
    z0: float
    dz: float
    nz: int
    values: np.ndarray = field(default=None)  # type: ignore[assignment]

    def __post_init__(self):
        if not (self.dx > 0 and self.dz > 0):
            raise GridError(f"grid spacings must be positive, got dx={self.dx}, dz={self.dz}")
        if self.nx < 2 or self.nz < 2:
            raise GridError(f"need at least 2 nodes per axis, got nx={self.nx}, nz={self.nz}")
        if self.values is None:
            self.values = np.zeros((self.nx, self.nz), dtype=complex)
        else:
            vals = np.asarray(self.values, dtype=complex)
            if vals.size != self.nx * self.nz:
                raise GridError(
                    f"value count {vals.size} does not match nx*nz = {self.nx * self.nz}"
                )
            self.values = np.ascontiguousarray(vals.reshape(self.nx, self.nz))

    @property
    def x_max(self) -> float:
        return self.x0 + (self.nx - 1) * self.dx

    @property
    def z_max(self) -> float:
        return self.z0 + (self.nz - 1) * self.dz

    def x_nodes(self) -> np.ndarray:
        return self.x0 + self.dx * np.arange(self.nx)

    def z_nodes(self) -> np.ndarray:
        return self.z0 + self.dz * np.arange(self.nz)

    def copy(self) -> "FieldGrid":
        return FieldGrid(self.x0, self.dx, self.nx, self.z0, self.dz, self.nz, self.values.copy())

    def zeros_like(self) -> "FieldGrid":
        return FieldGrid(self.x0, self.dx, self.nx, self.z0, self.dz, self.nz)

    def same_geometry(self, other: "FieldGrid") -> bool:
        return (
            self.nx == other.nx
            and self.nz == other.nz
            and np.isclose(self.x0, other.x0)
            and np.isclose(self.z0, other.z0)
            and np.isclose(self.dx, other.dx)
            and np.isclose(self.dz, other.dz)
        )


@dataclass(frozen=True)
class PhysicsConstants:
    """Coupling, speeds and detunings shared by both engines.

    g      radiation-matter coupling (frequency units)
    c      probe speed outside the EIT dip (length/time)
    v0     atomic flow speed along x (length/time)
    v_r    recoil velocity entering the excited-state drift (optional term)
    delta  two-photon detuning; the default regime is exact two-photon
           resonance delta = 0
    Delta  one-photon detuning
    gamma  excited-state decay rate (enters as Delta -> Delta - i*gamma)
    """

    g: float = 1.0
    c: float = 100.0
    v0: float = 0.1
    v_r: float = 0.0
    delta: float = 0.0
    Delta: float = 0.0
    gamma: float = 0.0

    def __post_init__(self):
        if self.c <= 0:
            raise ValueError(f"c must be positive, got {self.c}")
        if self.v0 < 0:
            raise ValueError(f"v0 must be nonnegative, got {self.v0}")
        if self.gamma < 0:
            raise ValueError(f"gamma must be nonnegative, got {self.gamma}")


ADVECTION = "advection"
FULL_MB = "full-MB"


@dataclass
class SolverState:
    """The field triple on a common grid at time t.

    In advection mode ``E`` holds the auxiliary amplitude (probe field
    divided by the peak Rabi frequency of the first control laser),
    ``psi_e`` is identically zero and ``psi_q`` is slaved to E.  In
    full-MB mode the three grids evolve independently.
    """

    t: float
    E: FieldGrid
    psi_e: FieldGrid
    psi_q: FieldGrid
    mode: str = ADVECTION

    def __post_init__(self):
        if self.mode not in (ADVECTION, FULL_MB):
            raise ValueError(f"unknown solver mode {self.mode!r}")
        if not (self.E.same_geometry(self.psi_e) and self.E.same_geometry(self.psi_q)):
            raise GridError("E, psi_e, psi_q must share identical grid geometry")

    def copy(self) -> "SolverState":
        return SolverState(self.t, self.E.copy(), self.psi_e.copy(), self.psi_q.copy(), self.mode)


def grid_interpolate(grid: FieldGrid, x: float, z: float) -> complex:
    """Bilinear interpolation of the four nodes surrounding (x, z).

    Exact at nodes and for affine functions of (x, z).  Queries outside
    the grid bounding box raise GridError naming the offending axis.
    """
    fx = (x - grid.x0) / grid.dx
    fz = (z - grid.z0) / grid.dz
    if fx < 0 or fx > grid.nx - 1:
        raise GridError(f"x = {x} outside grid range [{grid.x0}, {grid.x_max}]")
    if fz < 0 or fz > grid.nz - 1:
        raise GridError(f"z = {z} outside grid range [{grid.z0}, {grid.z_max}]")
    i = min(int(fx), grid.nx - 2)
    j = min(int(fz), grid.nz - 2)
    tx = fx - i
    tz = fz - j
    v = grid.values
    return complex(
        (1 - tx) * (1 - tz) * v[i, j]
        + tx * (1 - tz) * v[i + 1, j]
        + (1 - tx) * tz * v[i, j + 1]
        + tx * tz * v[i + 1, j + 1]
    )


def l2_norm(grid: FieldGrid) -> float:
    """Cell-weighted L2 norm sqrt(sum |v|^2 dx dz); zero iff the field is zero."""
    return float(np.sqrt(np.sum(np.abs(grid.values) ** 2) * grid.dx * grid.dz))

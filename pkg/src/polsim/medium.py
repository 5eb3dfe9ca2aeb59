"""Control-laser shapes, group-velocity profiles and the combined a(x).

Gaussian convention used throughout: a control laser's amplitude profile
is amplitude * exp(-((x - center)/width)**2), so width is the 1/e
half-width of the amplitude and the normalized intensity shape is
a_i(x) = exp(-2 ((x - center)/width)**2).

The medium's z-dependence is configured directly through the reduced
group velocity profile vg(z) (the group velocity on the axis of the
first control laser); the atomic density n(z) is derived from it as
n(z) = c * Omega1(x1)^2 / (g^2 vg(z)) where the full Maxwell-Bloch
engine needs it.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass
from typing import Optional

import numpy as np

from polsim.core import PhysicsConstants, PolsimError

PLUS_Z = "+z"
MINUS_Z = "-z"


class MediumError(PolsimError):
    """Inconsistent medium specification or undefined medium quantity."""


@dataclass(frozen=True)
class ControlLaser:
    """A stationary control beam propagating along +z or -z."""

    center: float
    width: float
    amplitude: float
    direction: str = PLUS_Z

    def __post_init__(self):
        if self.width <= 0:
            raise MediumError(f"control laser width must be positive, got {self.width}")
        if self.amplitude < 0:
            raise MediumError(f"control laser amplitude must be nonnegative, got {self.amplitude}")
        if self.direction not in (PLUS_Z, MINUS_Z):
            raise MediumError(f"direction must be '+z' or '-z', got {self.direction!r}")

    def rabi(self, x) -> np.ndarray:
        """Rabi-frequency amplitude profile at transverse position x."""
        x = np.asarray(x, dtype=float)
        return self.amplitude * np.exp(-(((x - self.center) / self.width) ** 2))


@dataclass(frozen=True)
class GaussianDipProfile:
    """vg(z) = base * (1 - dip_depth * exp(-((z - dip_center)/dip_width)^2))."""

    base: float = 1.0
    dip_depth: float = 0.0
    dip_center: float = 0.0
    dip_width: float = 1.0

    def __post_init__(self):
        if self.base <= 0:
            raise MediumError(f"vg base must be positive, got {self.base}")
        if not (0 <= self.dip_depth < 1):
            raise MediumError(f"dip depth must lie in [0, 1), got {self.dip_depth}")
        if self.dip_width <= 0:
            raise MediumError(f"dip width must be positive, got {self.dip_width}")

    def __call__(self, z) -> np.ndarray:
        z = np.asarray(z, dtype=float)
        return self.base * (1.0 - self.dip_depth * np.exp(-(((z - self.dip_center) / self.dip_width) ** 2)))


@dataclass(frozen=True)
class TabulatedProfile:
    """vg(z) from samples, linearly interpolated; queries must stay in range."""

    z_samples: np.ndarray
    vg_samples: np.ndarray

    def __post_init__(self):
        zs = np.asarray(self.z_samples, dtype=float)
        vs = np.asarray(self.vg_samples, dtype=float)
        if zs.ndim != 1 or zs.size < 2 or zs.size != vs.size:
            raise MediumError("tabulated profile needs matching 1D z and vg samples (>= 2)")
        if np.any(np.diff(zs) <= 0):
            raise MediumError("tabulated profile z samples must be strictly increasing")
        if np.any(vs <= 0):
            raise MediumError("tabulated vg samples must be positive")
        object.__setattr__(self, "z_samples", zs)
        object.__setattr__(self, "vg_samples", vs)

    def __call__(self, z) -> np.ndarray:
        z = np.asarray(z, dtype=float)
        if np.any(z < self.z_samples[0]) or np.any(z > self.z_samples[-1]):
            raise MediumError("vg profile queried outside tabulated range")
        return np.interp(z, self.z_samples, self.vg_samples)


@dataclass(frozen=True)
class MediumSpec:
    """Everything the engines need to know about the medium and lasers."""

    control1: ControlLaser
    vg_profile: object  # callable z -> vg(z) > 0
    constants: PhysicsConstants
    z1: float = 0.0
    control2: Optional[ControlLaser] = None

    def __post_init__(self):
        if self.control1.direction != PLUS_Z:
            raise MediumError("the first control laser must propagate along +z")
        if self.control1.amplitude == 0:
            raise MediumError("the first control laser needs a nonzero amplitude")
        if self.control2 is not None:
            sep = abs(self.control2.center - self.control1.center)
            wsum = self.control1.width + self.control2.width
            if sep < 3.0 * wsum:
                warnings.warn(
                    f"control lasers overlap: separation {sep:g} < 3 x (width1 + width2) = {3 * wsum:g}",
                    stacklevel=2,
                )

    @property
    def x1(self) -> float:
        return self.control1.center

    def vg(self, z) -> np.ndarray:
        return self.vg_profile(z)

    def validate_window(self, z_lo: float, z_hi: float, samples: int = 512) -> None:
        """Check vg > 0 across the simulation window."""
        zs = np.linspace(z_lo, z_hi, samples)
        vals = np.asarray(self.vg(zs))
        if np.any(vals <= 0):
            bad = zs[np.argmin(vals)]
            raise MediumError(f"vg(z) must be positive on the window; vg({bad:g}) <= 0")

    def omega_squared(self, x) -> np.ndarray:
        """Total control intensity Omega1(x)^2 + Omega2(x)^2 (cross term dropped
        for non-overlapping beams)."""
        tot = self.control1.rabi(x) ** 2
        if self.control2 is not None:
            tot = tot + self.control2.rabi(x) ** 2
        return tot

    def g_sqrt_n(self, z) -> np.ndarray:
        """g * sqrt(n(z)) with n derived from the vg profile; independent of g."""
        return self.control1.rabi(self.x1) * np.sqrt(self.constants.c / np.asarray(self.vg(z)))


def shape_a1(x, spec: MediumSpec) -> np.ndarray:
    """Normalized intensity shape of the first laser, [Omega1(x)/Omega1(x1)]^2."""
    om1 = spec.control1.rabi(spec.x1)
    return (spec.control1.rabi(x) / om1) ** 2


def shape_combined(x, spec: MediumSpec) -> np.ndarray:
    """Signed combined shape a(x) = a1(x) +/- a2(x).

    The second laser adds when co-propagating with the first and
    subtracts when counter-propagating; either way it is normalized
    against the first laser's peak, a2(x) = [Omega2(x)/Omega1(x1)]^2,
    so equal-amplitude lasers give |a2(x2)| = 1.
    """
    a = shape_a1(x, spec)
    if spec.control2 is None:
        return a
    om1 = spec.control1.rabi(spec.x1)
    a2 = (spec.control2.rabi(x) / om1) ** 2
    sign = 1.0 if spec.control2.direction == PLUS_Z else -1.0
    return a + sign * a2


def group_velocity(x, z, spec: MediumSpec) -> np.ndarray:
    """Signed group velocity vg(z) * a(x); negative values propagate along -z."""
    return np.asarray(spec.vg(z)) * shape_combined(x, spec)


def group_index(x, z, spec: MediumSpec) -> np.ndarray:
    """Group index g^2 n(z) / Omega(x)^2.

    With n(z) derived from the vg profile this equals
    c / (vg(z) * (a1(x) + a2(x))), so c / group_index reproduces
    group_velocity wherever the beams co-propagate.
    """
    om_sq = spec.omega_squared(x)
    if np.any(om_sq == 0):
        raise MediumError("group index undefined outside control beams")
    g_sq_n = spec.constants.c * spec.control1.rabi(spec.x1) ** 2 / np.asarray(spec.vg(z))
    return g_sq_n / om_sq

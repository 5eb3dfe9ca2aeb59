"""Semi-analytic propagator built on the characteristic coordinates.

The advected auxiliary amplitude is constant along curves of constant
xi(x, z) = A(x) - v0 * B(z), where A is the cumulative integral of the
combined laser shape a(x) from the first laser's axis and B is the
cumulative integral of 1/vg(z) from the entry plane.  Both cumulative
integrals are tabulated once per medium on refinement lattices with
composite adaptive Simpson increments; evaluation between lattice nodes
finishes the integral with a short fixed Simpson rule, keeping every
query inside the stated quadrature tolerance.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass
from typing import Optional

import numpy as np

from polsim.core import PolsimError
from polsim.medium import MediumError, MediumSpec, shape_combined

DEFAULT_TOL = 1e-8


class CharacteristicsError(PolsimError):
    """Query outside the tabulated window or unmet storage precondition."""


# ----------------------------------------------------------------------
# Quadrature: adaptive Simpson increments over a refinement lattice
# ----------------------------------------------------------------------

def _adaptive_simpson(f, a: float, b: float, tol: float, max_depth: int = 40) -> float:
    """Adaptive Simpson integral of a scalar-capable callable on [a, b]."""
    if a == b:
        return 0.0

    def simpson(lo, flo, mid, fmid, hi, fhi):
        return (hi - lo) / 6.0 * (flo + 4.0 * fmid + fhi)

    m = 0.5 * (a + b)
    fa, fm, fb = (float(f(v)) for v in (a, m, b))
    whole = simpson(a, fa, m, fm, b, fb)
    # stack entries: (lo, mid, hi, flo, fmid, fhi, estimate, tol, depth)
    stack = [(a, m, b, fa, fm, fb, whole, tol, 0)]
    total = 0.0
    while stack:
        lo, mid, hi, flo, fmid, fhi, est, eps, depth = stack.pop()
        lm = 0.5 * (lo + mid)
        rm = 0.5 * (mid + hi)
        flm = float(f(lm))
        frm = float(f(rm))
        left = simpson(lo, flo, lm, flm, mid, fmid)
        right = simpson(mid, fmid, rm, frm, hi, fhi)
        delta = left + right - est
        if depth >= max_depth or abs(delta) <= 15.0 * eps:
            total += left + right + delta / 15.0
        else:
            stack.append((lo, lm, mid, flo, flm, fmid, left, eps / 2.0, depth + 1))
            stack.append((mid, rm, hi, fmid, frm, fhi, right, eps / 2.0, depth + 1))
    return total


def _cumulative_table(f, nodes: np.ndarray, tol: float) -> np.ndarray:
    """Cumulative integral of f from nodes[0], one adaptive increment per cell."""
    span = nodes[-1] - nodes[0]
    increments = np.empty(nodes.size - 1)
    for k in range(nodes.size - 1):
        h = nodes[k + 1] - nodes[k]
        increments[k] = _adaptive_simpson(f, nodes[k], nodes[k + 1], tol * h / span)
    out = np.empty(nodes.size)
    out[0] = 0.0
    np.cumsum(increments, out=out[1:])
    return out


def _refined_z_lattice(inv_vg, z_lo: float, z_hi: float, base_cells: int) -> np.ndarray:
    """Uniform z lattice, split 8x where 1/vg exceeds 4x its median."""
    base = np.linspace(z_lo, z_hi, base_cells + 1)
    vals = np.asarray(inv_vg(base))
    median = float(np.median(vals))
    mids = 0.5 * (base[:-1] + base[1:])
    sharp = np.asarray(inv_vg(mids)) > 4.0 * median
    pieces = []
    for k in range(base_cells):
        n_sub = 8 if sharp[k] else 1
        pieces.append(np.linspace(base[k], base[k + 1], n_sub + 1)[:-1])
    pieces.append(np.array([z_hi]))
    return np.concatenate(pieces)


def _eval_cumulative(f, nodes: np.ndarray, cum: np.ndarray, q) -> np.ndarray:
    """Table value at the cell's left node plus a 5-point Simpson remainder."""
    q = np.asarray(q, dtype=float)
    idx = np.clip(np.searchsorted(nodes, q, side="right") - 1, 0, nodes.size - 2)
    x0 = nodes[idx]
    h = q - x0
    # composite Simpson on [x0, q] with two panels; exactness to O(h^5)
    # keeps the remainder far below the table tolerance on a fine lattice
    f0 = np.asarray(f(x0))
    f1 = np.asarray(f(x0 + 0.25 * h))
    f2 = np.asarray(f(x0 + 0.5 * h))
    f3 = np.asarray(f(x0 + 0.75 * h))
    f4 = np.asarray(f(q))
    return cum[idx] + h / 12.0 * (f0 + 4.0 * f1 + 2.0 * f2 + 4.0 * f3 + f4)


# ----------------------------------------------------------------------
# The characteristic map
# ----------------------------------------------------------------------

@dataclass(frozen=True)
class CharacteristicMap:
    """Cached cumulative tables A(x), B(z) for one medium and window."""

    spec: MediumSpec
    x_nodes: np.ndarray
    A_cum: np.ndarray
    z_nodes: np.ndarray
    B_cum: np.ndarray
    v0: float
    tol: float

    @property
    def x_lo(self) -> float:
        return float(self.x_nodes[0])

    @property
    def x_hi(self) -> float:
        return float(self.x_nodes[-1])

    @property
    def z_lo(self) -> float:
        return float(self.z_nodes[0])

    @property
    def z_hi(self) -> float:
        return float(self.z_nodes[-1])

    def _a(self, x):
        return shape_combined(x, self.spec)

    def _inv_vg(self, z):
        return 1.0 / np.asarray(self.spec.vg(z))

    def A(self, x) -> np.ndarray:
        """Cumulative shape integral from the first laser's axis."""
        self._check_x(x)
        return _eval_cumulative(self._a, self.x_nodes, self.A_cum, x)

    def B(self, z) -> np.ndarray:
        """Cumulative slowness integral from the entry plane."""
        self._check_z(z)
        return _eval_cumulative(self._inv_vg, self.z_nodes, self.B_cum, z)

    def _check_x(self, x) -> None:
        x = np.asarray(x)
        if np.any(x < self.x_lo - 1e-12) or np.any(x > self.x_hi + 1e-12):
            raise CharacteristicsError(
                f"x query outside tabulated window [{self.x_lo}, {self.x_hi}]"
            )

    def _check_z(self, z) -> None:
        z = np.asarray(z)
        if np.any(z < self.z_lo - 1e-12) or np.any(z > self.z_hi + 1e-12):
            raise CharacteristicsError(
                f"z query outside tabulated window [{self.z_lo}, {self.z_hi}]"
            )

    def invert_B(self, target: float, tol: float = 1e-12) -> float:
        """z with B(z) = target, by bisection in the monotone table."""
        b_lo, b_hi = float(self.B_cum[0]), float(self.B_cum[-1])
        if not (b_lo <= target <= b_hi):
            raise CharacteristicsError(f"B target {target:g} outside [{b_lo:g}, {b_hi:g}]")
        k = int(np.clip(np.searchsorted(self.B_cum, target) - 1, 0, self.z_nodes.size - 2))
        lo, hi = float(self.z_nodes[k]), float(self.z_nodes[k + 1])
        f_lo = float(self.B(lo)) - target
        for _ in range(200):
            mid = 0.5 * (lo + hi)
            if hi - lo < tol:
                return mid
            f_mid = float(self.B(mid)) - target
            if (f_lo <= 0) == (f_mid <= 0):
                lo, f_lo = mid, f_mid
            else:
                hi = mid
        return 0.5 * (lo + hi)


def build_characteristic_map(
    spec: MediumSpec,
    x_lo: float,
    x_hi: float,
    z_lo: float,
    z_hi: float,
    tol: float = DEFAULT_TOL,
    x_cells: int = 2048,
    z_cells: int = 1024,
) -> CharacteristicMap:
    """Tabulate A and B for the given medium over the simulation window."""
    if not (x_lo < x_hi and z_lo < z_hi):
        raise CharacteristicsError("window bounds must satisfy x_lo < x_hi and z_lo < z_hi")
    spec.validate_window(z_lo, z_hi)

    def a_of(x):
        return shape_combined(x, spec)

    def inv_vg(z):
        return 1.0 / np.asarray(spec.vg(z))

    x_nodes = np.linspace(x_lo, x_hi, x_cells + 1)
    x1 = spec.x1
    if not (x_lo <= x1 <= x_hi):
        raise CharacteristicsError("first control laser's axis must lie inside the window")
    # anchor A at the first laser's axis so that A(x1) = 0
    if x1 not in x_nodes:
        x_nodes = np.sort(np.append(x_nodes, x1))
    raw_A = _cumulative_table(a_of, x_nodes, tol)
    A_cum = raw_A - raw_A[np.searchsorted(x_nodes, x1)]

    z_nodes = _refined_z_lattice(inv_vg, z_lo, z_hi, z_cells)
    B_cum = _cumulative_table(inv_vg, z_nodes, tol)
    if np.any(np.diff(B_cum) <= 0):
        raise CharacteristicsError("B table not strictly increasing; vg profile invalid")

    return CharacteristicMap(
        spec=spec,
        x_nodes=x_nodes,
        A_cum=A_cum,
        z_nodes=z_nodes,
        B_cum=B_cum,
        v0=spec.constants.v0,
        tol=tol,
    )


# ----------------------------------------------------------------------
# Probe pulse
# ----------------------------------------------------------------------

@dataclass(frozen=True)
class ProbeSpec:
    """Incoming probe envelope on the entry plane z = z1.

    Widths follow the Gaussian 1/e half-width convention used for the
    control lasers: the boundary field is
    amplitude * exp(-((x - x_center)/x_halfwidth)^2
                    - ((t - t_center)/t_halfwidth)^2).
    """

    z1: float
    x_center: float
    x_halfwidth: float
    t_center: float
    t_halfwidth: float
    amplitude: float = 1.0

    def __post_init__(self):
        if self.x_halfwidth <= 0 or self.t_halfwidth <= 0:
            raise ValueError("probe half-width and half-duration must be positive")

    def envelope(self, xq, tq) -> np.ndarray:
        xq = np.asarray(xq, dtype=float)
        tq = np.asarray(tq, dtype=float)
        return self.amplitude * np.exp(
            -(((xq - self.x_center) / self.x_halfwidth) ** 2)
            - ((tq - self.t_center) / self.t_halfwidth) ** 2
        )

    def check_against(self, spec: MediumSpec) -> None:
        ratio = spec.control1.width / self.x_halfwidth
        if ratio < 3.0:
            warnings.warn(
                f"probe half-width {self.x_halfwidth:g} is not much smaller than the "
                f"first control beam width {spec.control1.width:g} (ratio {ratio:.2f} < 3)",
                stacklevel=2,
            )


# ----------------------------------------------------------------------
# Characteristic coordinates and the propagated fields
# ----------------------------------------------------------------------

def xi(x, z, cmap: CharacteristicMap) -> np.ndarray:
    """Transverse characteristic coordinate A(x) - v0 * B(z)."""
    return cmap.A(x) - cmap.v0 * cmap.B(z)


def tau(t, x, z, cmap: CharacteristicMap) -> np.ndarray:
    """Retarded time t + (xi(x, z) - x)/v0; needs a moving medium."""
    if cmap.v0 <= 0:
        raise CharacteristicsError("tau undefined; use static-medium mode")
    return np.asarray(t, dtype=float) + (xi(x, z, cmap) - np.asarray(x, dtype=float)) / cmap.v0


def field_at(t, x, z, probe: ProbeSpec, cmap: CharacteristicMap, spec: MediumSpec):
    """Electric and spin amplitudes of the polariton at one or more points.

    E picks up the sqrt(|a(x)|) projection onto the local control beam;
    the spin amplitude carries the full boundary envelope scaled by the
    local density factor, so |E/psi_q|^2 equals |vg a| / c pointwise.
    """
    env = probe.envelope(xi(x, z, cmap), tau(t, x, z, cmap))
    a = shape_combined(x, spec)
    E = np.sqrt(np.abs(a)) * env
    psi_q = -np.sqrt(spec.constants.c / np.asarray(spec.vg(z))) * env
    return E, psi_q


def fields_on_grid(
    t: float,
    x_vals: np.ndarray,
    z_vals: np.ndarray,
    probe: ProbeSpec,
    cmap: CharacteristicMap,
    spec: MediumSpec,
) -> dict:
    """Vectorized Eq.-of-motion solution sampled on a tensor grid.

    Returns arrays of shape (len(x_vals), len(z_vals)) for the probe
    field E, the spin amplitude psi_q and the advected auxiliary
    amplitude E_tilde.
    """
    if cmap.v0 <= 0:
        raise CharacteristicsError("tau undefined; use static-medium mode")
    x_vals = np.asarray(x_vals, dtype=float)
    z_vals = np.asarray(z_vals, dtype=float)
    A = cmap.A(x_vals)[:, None]
    B = cmap.B(z_vals)[None, :]
    xi_g = A - cmap.v0 * B
    tau_g = t + (xi_g - x_vals[:, None]) / cmap.v0
    env = probe.envelope(xi_g, tau_g)
    a = shape_combined(x_vals, spec)[:, None]
    om1 = spec.control1.rabi(spec.x1)
    sqrt_n_fac = np.sqrt(spec.constants.c / np.asarray(spec.vg(z_vals)))[None, :]
    return {
        "E": np.sqrt(np.abs(a)) * env,
        "psi_q": -sqrt_n_fac * env,
        "E_tilde": env / om1,
    }


def trace_trajectory(xi0: float, cmap: CharacteristicMap, x_step: Optional[float] = None) -> np.ndarray:
    """Polyline of the level set xi(x, z) = xi0, marching in x.

    xi is monotone decreasing in z, so each x column is solved by
    bisection in the B table.  Returns an (n, 2) array of (x, z)
    vertices; empty (with a notice) if the level set misses the window.
    """
    if cmap.v0 <= 0:
        raise CharacteristicsError("trajectories need v0 > 0")
    if x_step is None:
        xs = cmap.x_nodes
    else:
        xs = np.arange(cmap.x_lo, cmap.x_hi + 0.5 * x_step, x_step)
    A_vals = cmap.A(xs)
    targets = (A_vals - xi0) / cmap.v0
    b_lo, b_hi = float(cmap.B_cum[0]), float(cmap.B_cum[-1])
    inside = (targets >= b_lo) & (targets <= b_hi)
    pts = [(float(x), cmap.invert_B(float(tgt))) for x, tgt in zip(xs[inside], targets[inside])]
    if not pts:
        warnings.warn(f"level set xi = {xi0:g} does not intersect the window", stacklevel=2)
        return np.empty((0, 2))
    return np.asarray(pts)


# ----------------------------------------------------------------------
# Storage geometry
# ----------------------------------------------------------------------

def _storage_cutoff_x(cmap: CharacteristicMap) -> float:
    """Transverse point where the shape integral saturates for storage.

    Beyond the first beam the polariton is a pure spin wave; with a
    second beam present the saturation plateau is the |a| minimum
    between the two beam axes, otherwise the point where a has decayed
    to 1e-12 of its on-axis value (window edge as fallback).
    """
    spec = cmap.spec
    xs = cmap.x_nodes
    a_vals = np.abs(np.asarray(shape_combined(xs, spec)))
    a_peak = float(np.abs(shape_combined(spec.x1, spec)))
    if spec.control2 is not None:
        lo = min(spec.x1, spec.control2.center)
        hi = max(spec.x1, spec.control2.center)
        mask = (xs >= lo) & (xs <= hi)
        inner = np.where(mask)[0]
        return float(xs[inner[np.argmin(a_vals[inner])]])
    beyond = np.where((xs > spec.x1) & (a_vals < 1e-12 * a_peak))[0]
    if beyond.size:
        return float(xs[beyond[0]])
    return cmap.x_hi


def find_z_infinity(cmap: CharacteristicMap, tol: float = 1e-10) -> float:
    """Resting depth of the stored spin wave.

    Solves B(z_inf) = A(infinity)/v0, with A(infinity) taken at the
    storage cutoff.  Raises if the medium is too thin in z for the
    polariton to stop inside the window.
    """
    if cmap.v0 <= 0:
        raise CharacteristicsError("z_infinity needs v0 > 0")
    x_stop = _storage_cutoff_x(cmap)
    target = float(cmap.A(x_stop)) / cmap.v0
    if target > float(cmap.B_cum[-1]):
        raise CharacteristicsError(
            "pulse exits medium; not stored (shape integral exceeds the z window's slowness budget)"
        )
    if target < float(cmap.B_cum[0]):
        raise CharacteristicsError("storage plane lies below the entry plane")
    return cmap.invert_B(target, tol=tol)


@dataclass(frozen=True)
class SpinWaveExtent:
    dx_s: float
    dz_s: float
    z_infinity: float


def spin_wave_extent(probe: ProbeSpec, cmap: CharacteristicMap, spec: MediumSpec) -> SpinWaveExtent:
    """Predicted stored-wave dimensions (drift x duration, compressed width)."""
    v0 = cmap.v0
    if v0 > 0.2 * probe.x_halfwidth / probe.t_halfwidth:
        warnings.warn(
            "spin-wave extent formula assumes v0 << dx_p/dtau_p; "
            f"v0 = {v0:g} exceeds 0.2 * {probe.x_halfwidth / probe.t_halfwidth:g}",
            stacklevel=2,
        )
    z_inf = find_z_infinity(cmap)
    dx_s = v0 * probe.t_halfwidth
    dz_s = probe.x_halfwidth * float(spec.vg(z_inf)) / v0
    return SpinWaveExtent(dx_s=dx_s, dz_s=dz_s, z_infinity=z_inf)


@dataclass(frozen=True)
class StorageFeasibility:
    margin: float
    classification: str
    z_infinity: Optional[float]


def storage_feasibility(
    probe: ProbeSpec, dz_atom: float, cmap: CharacteristicMap, spec: MediumSpec
) -> StorageFeasibility:
    """Margin of the complete-transfer condition against the beam height.

    margin = [v0/vg(z_inf)] / [dx_p/dz_atom]; >= 5 is "stored",
    [1, 5) "marginal", < 1 "escapes".  A pulse that cannot stop inside
    the window is classified "escapes" outright.
    """
    if dz_atom <= 0:
        raise ValueError("dz_atom must be positive")
    try:
        z_inf = find_z_infinity(cmap)
    except CharacteristicsError:
        return StorageFeasibility(margin=0.0, classification="escapes", z_infinity=None)
    margin = (cmap.v0 / float(spec.vg(z_inf))) / (probe.x_halfwidth / dz_atom)
    if margin >= 5.0:
        label = "stored"
    elif margin >= 1.0:
        label = "marginal"
    else:
        label = "escapes"
    return StorageFeasibility(margin=margin, classification=label, z_infinity=z_inf)


def retrieved_width(dx_p1: float, spec: MediumSpec) -> float:
    """Transverse width of the regenerated probe, dx_p1 / |a2(x2)|.

    Follows from linearizing xi around the second beam's axis; the
    propagation direction of the second laser does not enter.
    """
    if spec.control2 is None or spec.control2.amplitude == 0:
        raise MediumError("retrieved width needs a second control laser with nonzero amplitude")
    a2_peak = (spec.control2.amplitude / spec.control1.rabi(spec.x1)) ** 2
    return dx_p1 / abs(a2_peak)

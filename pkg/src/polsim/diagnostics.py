"""Measurement layer: moments, widths, excitation counts, geometry checks.

Width convention: profiles are measured as the half-width at half
maximum of the |field|^2 marginal along an axis, with linear
interpolation between nodes.  For the Gaussian envelope family
amp * exp(-(u/D)^2) this equals D * sqrt(ln 2 / 2); measurements are
converted back to the 1/e half-width D where they are compared against
analytic dimensions, so the convention drops out of every verdict.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import List, Optional, Sequence

import numpy as np

from polsim.characteristics import (
    CharacteristicMap,
    ProbeSpec,
    find_z_infinity,
    retrieved_width,
    spin_wave_extent,
    storage_feasibility,
)
from polsim.core import ADVECTION, FieldGrid, PolsimError, SolverState
from polsim.medium import MediumSpec, shape_combined
from polsim.solver import physical_probe_field

# hwhm of the |field|^2 marginal of exp(-(u/D)^2) is D * sqrt(ln2/2)
HWHM_OF_UNIT_HALFWIDTH = math.sqrt(math.log(2.0) / 2.0)


class DiagnosticsError(PolsimError):
    """Measurement undefined for the given field (e.g. identically zero)."""


def _marginal(grid: FieldGrid, axis: str):
    if axis == "x":
        coords = grid.x_nodes()
        profile = np.sum(np.abs(grid.values) ** 2, axis=1) * grid.dz
        step = grid.dx
    elif axis == "z":
        coords = grid.z_nodes()
        profile = np.sum(np.abs(grid.values) ** 2, axis=0) * grid.dx
        step = grid.dz
    else:
        raise ValueError(f"axis must be 'x' or 'z', got {axis!r}")
    return coords, profile, step


def _hwhm(coords: np.ndarray, profile: np.ndarray) -> float:
    """Half-width at half maximum with linear interpolation at the crossings."""
    peak_idx = int(np.argmax(profile))
    half = 0.5 * profile[peak_idx]

    def crossing(indices) -> float:
        prev = peak_idx
        for k in indices:
            if profile[k] < half:
                # interpolate between k and prev
                f0, f1 = profile[prev], profile[k]
                frac = (f0 - half) / (f0 - f1)
                return abs(coords[prev] + frac * (coords[k] - coords[prev]) - coords[peak_idx])
            prev = k
        return abs(coords[indices[-1]] - coords[peak_idx]) if len(indices) else 0.0

    left = crossing(range(peak_idx - 1, -1, -1))
    right = crossing(range(peak_idx + 1, len(profile)))
    if left == 0.0 and right == 0.0:
        return 0.0
    if left == 0.0 or right == 0.0:
        return max(left, right)
    return 0.5 * (left + right)


def centroid_and_width(grid: FieldGrid, axis: str):
    """(centroid, hwhm) of the |values|^2 marginal along the chosen axis."""
    coords, profile, _ = _marginal(grid, axis)
    total = float(np.sum(profile))
    if total == 0.0:
        raise DiagnosticsError("centroid undefined for an identically zero field")
    centroid = float(np.sum(coords * profile) / total)
    return centroid, _hwhm(coords, profile)


def excitation_numbers(state: SolverState):
    """(N_E, N_e, N_q): integrated |field|^2 for the three components."""
    w = state.E.dx * state.E.dz
    n_E = float(np.sum(np.abs(state.E.values) ** 2) * w)
    n_e = float(np.sum(np.abs(state.psi_e.values) ** 2) * w)
    n_q = float(np.sum(np.abs(state.psi_q.values) ** 2) * w)
    return n_E, n_e, n_q


def polariton_ratio_check(state: SolverState, spec: MediumSpec, mask_fraction: float = 0.01) -> float:
    """Worst relative deviation of |E|^2/|psi_q|^2 from |vg a|/c.

    Nodes are kept only where the photon density exceeds mask_fraction
    of its own maximum, which drops the region outside the control
    beams where both the field and the local group velocity vanish.
    """
    E = physical_probe_field(state, spec) if state.mode == ADVECTION else state.E.values
    psi_q = state.psi_q.values
    x = state.E.x_nodes()
    z = state.E.z_nodes()
    vg_over_c = (
        np.abs(shape_combined(x, spec))[:, None]
        * np.asarray(spec.vg(z))[None, :]
        / spec.constants.c
    )
    e_sq = np.abs(E) ** 2
    density = e_sq + np.abs(state.psi_e.values) ** 2 + np.abs(psi_q) ** 2
    peak = float(e_sq.max())
    if peak == 0.0:
        return 0.0
    mask = (
        (e_sq >= mask_fraction * peak)
        & (density >= mask_fraction * float(density.max()))
        & (np.abs(psi_q) ** 2 > 0)
        & (vg_over_c > 0)
    )
    if not np.any(mask):
        return 0.0
    ratio = e_sq[mask] / np.abs(psi_q[mask]) ** 2
    return float(np.max(np.abs(ratio / vg_over_c[mask] - 1.0)))


# ----------------------------------------------------------------------
# Geometry verification report
# ----------------------------------------------------------------------

@dataclass
class ReportEntry:
    name: str
    measured: Optional[float]
    predicted: Optional[float]
    note: str = ""

    @property
    def rel_deviation(self) -> Optional[float]:
        if self.measured is None or self.predicted is None or self.predicted == 0:
            return None
        return abs(self.measured - self.predicted) / abs(self.predicted)

    def to_line(self) -> str:
        if self.measured is None or self.predicted is None:
            return f"{self.name}: not applicable ({self.note})"
        dev = self.rel_deviation
        dev_txt = f"{dev:.3%}" if dev is not None else "n/a"
        line = (
            f"{self.name}: measured {self.measured:.6g}, predicted {self.predicted:.6g}, "
            f"deviation {dev_txt}"
        )
        if self.note:
            line += f" [{self.note}]"
        return line


@dataclass
class GeometryReport:
    entries: List[ReportEntry] = field(default_factory=list)
    stored_snapshot_times: List[float] = field(default_factory=list)

    def entry(self, name: str) -> ReportEntry:
        for e in self.entries:
            if e.name == name:
                return e
        raise KeyError(name)

    def to_text(self) -> str:
        lines = ["geometry verification report"]
        if self.stored_snapshot_times:
            times = ", ".join(f"{t:g}" for t in self.stored_snapshot_times)
            lines.append(f"stored-phase snapshots: t = {times}")
        else:
            lines.append("stored-phase snapshots: none detected")
        lines += [e.to_line() for e in self.entries]
        return "\n".join(lines)

    def to_keyvalues(self) -> str:
        rows = []
        for e in self.entries:
            key = e.name.replace(" ", "_")
            if e.measured is None or e.predicted is None:
                rows.append(f"{key}.applicable=false")
                continue
            rows.append(f"{key}.applicable=true")
            rows.append(f"{key}.measured={e.measured!r}")
            rows.append(f"{key}.predicted={e.predicted!r}")
            rows.append(f"{key}.rel_deviation={e.rel_deviation!r}")
        return "\n".join(rows)


def _beam_support_mask(x: np.ndarray, spec: MediumSpec, level: float = 1e-4) -> np.ndarray:
    """Transverse nodes lying under any control beam (intensity above level)."""
    om1_sq = spec.control1.rabi(spec.x1) ** 2
    return spec.omega_squared(x) >= level * om1_sq


def _aux_field(state: SolverState, spec: MediumSpec) -> np.ndarray:
    """Auxiliary (beam-shape free) amplitude used for extent measurements."""
    if state.mode == ADVECTION:
        return state.E.values
    x = state.E.x_nodes()
    om = np.sqrt(spec.omega_squared(x))[:, None]
    return state.E.values / om


def _masked_grid(state: SolverState, values: np.ndarray, mask: np.ndarray) -> FieldGrid:
    g = state.E.zeros_like()
    g.values = np.where(mask, values, 0.0)
    return g


def stored_phase_indices(snapshots: Sequence[SolverState], spec: MediumSpec, level: float = 0.05):
    """Post-entry snapshots whose probe content under the beams fell below
    `level` of the run maximum (the pure-spin phase)."""
    x = snapshots[0].E.x_nodes()
    beam_cols = _beam_support_mask(x, spec)
    content = []
    for snap in snapshots:
        E = physical_probe_field(snap, spec) if snap.mode == ADVECTION else snap.E.values
        content.append(float(np.sum(np.abs(E[beam_cols, :]) ** 2)))
    run_max = max(content)
    if run_max == 0.0:
        return []
    peak = int(np.argmax(content))
    return [k for k, c in enumerate(content) if k > peak and c < level * run_max]


def verify_geometry(
    snapshots: Sequence[SolverState],
    probe: ProbeSpec,
    cmap: CharacteristicMap,
    spec: MediumSpec,
    dz_atom: float,
) -> GeometryReport:
    """Compare solver measurements against the characteristics predictions.

    Predictions come exclusively from the characteristics module;
    measurements exclusively from the snapshots.  Entries whose
    precondition fails (no stored phase, no second laser) are flagged
    rather than raised.
    """
    report = GeometryReport()
    feas = storage_feasibility(probe, dz_atom, cmap, spec)
    report.entries.append(
        ReportEntry(
            "storage margin",
            measured=None,
            predicted=feas.margin,
            note=f"classified {feas.classification}",
        )
    )

    x = snapshots[0].E.x_nodes()
    z = snapshots[0].E.z_nodes()
    # stored-wave measurements keep everything on the first beam's side;
    # with a second beam present its half of the window holds the
    # retrieved field and is excluded
    if spec.control2 is not None:
        x_limit = 0.5 * (spec.x1 + spec.control2.center)
        stored_cols = x < x_limit
    else:
        stored_cols = np.ones_like(x, dtype=bool)

    stored = stored_phase_indices(snapshots, spec)
    report.stored_snapshot_times = [snapshots[k].t for k in stored]

    if feas.classification == "escapes" or not stored:
        note = "run lacks a stored phase"
        for name in ("stored z centroid", "x drift slope", "spin wave dx", "spin wave dz"):
            report.entries.append(ReportEntry(name, None, None, note=note))
    else:
        z_inf = find_z_infinity(cmap)
        extent = spin_wave_extent(probe, cmap, spec)

        centroids_x = []
        centroids_z = []
        times = []
        for k in stored:
            snap = snapshots[k]
            aux = _aux_field(snap, spec)
            masked = _masked_grid(snap, aux, stored_cols[:, None])
            if float(np.sum(np.abs(masked.values) ** 2)) == 0.0:
                continue
            cx, _ = centroid_and_width(masked, "x")
            cz, _ = centroid_and_width(masked, "z")
            centroids_x.append(cx)
            centroids_z.append(cz)
            times.append(snap.t)

        if len(times) >= 1:
            report.entries.append(
                ReportEntry("stored z centroid", float(np.mean(centroids_z)), z_inf)
            )
        else:
            report.entries.append(ReportEntry("stored z centroid", None, z_inf, note="empty stored field"))

        if len(times) >= 2:
            slope = float(np.polyfit(times, centroids_x, 1)[0])
            report.entries.append(ReportEntry("x drift slope", slope, spec.constants.v0))
        else:
            report.entries.append(
                ReportEntry("x drift slope", None, spec.constants.v0, note="needs >= 2 stored snapshots")
            )

        # Widths come from the last stored snapshot, restricted to columns
        # that have left the first beam's support (trajectories there have
        # reached their asymptote, so the climbing tail cannot contaminate
        # the profile).  The stored wave is sheared in (x, z): its
        # transverse dimension is the x width at fixed z (cut at the z
        # centroid row), its depth dimension the full z extent (marginal).
        last = snapshots[stored[-1]]
        parked_cols = stored_cols & ~_beam_support_mask(x, spec, level=1e-2)
        aux = _aux_field(last, spec)
        masked = _masked_grid(last, aux, parked_cols[:, None])
        if float(np.sum(np.abs(masked.values) ** 2)) > 0.0:
            cz_last, hwhm_z = centroid_and_width(masked, "z")
            j_row = int(round((cz_last - last.E.z0) / last.E.dz))
            j_row = min(max(j_row, 0), last.E.nz - 1)
            row = np.abs(masked.values[:, j_row]) ** 2
            hwhm_x = _hwhm(last.E.x_nodes(), row) if row.max() > 0 else 0.0
            report.entries.append(
                ReportEntry(
                    "spin wave dx",
                    hwhm_x / HWHM_OF_UNIT_HALFWIDTH,
                    extent.dx_s,
                    note=f"x cut at z = {cz_last:.4g}, t = {last.t:g}",
                )
            )
            report.entries.append(
                ReportEntry("spin wave dz", hwhm_z / HWHM_OF_UNIT_HALFWIDTH, extent.dz_s)
            )
        else:
            note = "stored wave has not left the beam support"
            report.entries.append(ReportEntry("spin wave dx", None, extent.dx_s, note=note))
            report.entries.append(ReportEntry("spin wave dz", None, extent.dz_s, note=note))

    if spec.control2 is None or spec.control2.amplitude == 0:
        report.entries.append(
            ReportEntry("retrieved width", None, None, note="no second control laser; storage-only run")
        )
        return report

    # The width law is stated on the plane z2 where the regenerated beam
    # is centered on the second laser's axis (the level set through
    # (x2, z2) has xi = 0 there).  Summing |aux|^2 over snapshot times on
    # that row acts as a detector and integrates out the temporal
    # structure, leaving the transverse profile of the output beam.
    predicted = retrieved_width(probe.x_halfwidth, spec)
    x_mid = 0.5 * (spec.x1 + spec.control2.center)
    target_B = float(cmap.A(spec.control2.center)) / cmap.v0
    b_lo, b_hi = float(cmap.B_cum[0]), float(cmap.B_cum[-1])
    pad = 1e-9 * max(1.0, abs(b_hi))  # counter-propagating equal beams land exactly on b_lo
    if not (b_lo - pad <= target_B <= b_hi + pad):
        report.entries.append(
            ReportEntry(
                "retrieved width", None, predicted,
                note="output plane xi(x2, z2) = 0 lies outside the z window",
            )
        )
        return report
    z2 = cmap.invert_B(min(max(target_B, b_lo), b_hi))
    grid0 = snapshots[0].E
    j_row = int(round((z2 - grid0.z0) / grid0.dz))
    j_row = min(max(j_row, 0), grid0.nz - 1)
    side = x >= x_mid
    profile = np.zeros(x.size)
    for snap in snapshots:
        aux = _aux_field(snap, spec)
        profile += np.abs(aux[:, j_row]) ** 2
    profile = np.where(side, profile, 0.0)
    if profile.max() == 0.0:
        report.entries.append(
            ReportEntry("retrieved width", None, predicted, note="no retrieved field on the output plane")
        )
        return report
    hwhm_x = _hwhm(x, profile)
    report.entries.append(
        ReportEntry(
            "retrieved width",
            hwhm_x / HWHM_OF_UNIT_HALFWIDTH,
            predicted,
            note=f"time-integrated on the output plane z2 = {z2:.4g}",
        )
    )
    return report

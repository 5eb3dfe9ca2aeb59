import numpy as np
import pytest

from polsim.core import ADVECTION, FULL_MB, FieldGrid, PhysicsConstants, SolverState
from polsim.characteristics import ProbeSpec, build_characteristic_map, fields_on_grid
from polsim.diagnostics import (
    DiagnosticsError,
    GeometryReport,
    ReportEntry,
    centroid_and_width,
    excitation_numbers,
    polariton_ratio_check,
    verify_geometry,
)
from polsim.medium import ControlLaser, GaussianDipProfile, MediumSpec


def grid_with(fn, nx=201, nz=201, xw=(-4.0, 4.0), zw=(-4.0, 4.0)):
    g = FieldGrid(xw[0], (xw[1] - xw[0]) / (nx - 1), nx, zw[0], (zw[1] - zw[0]) / (nz - 1), nz)
    xs, zs = g.x_nodes(), g.z_nodes()
    g.values = np.asarray(fn(xs[:, None], zs[None, :]), dtype=complex)
    return g


class TestCentroidAndWidth:
    def test_gaussian_closed_form(self):
        g = grid_with(lambda x, z: np.exp(-(x**2) - z**2))
        cx, wx = centroid_and_width(g, "x")
        assert cx == pytest.approx(0.0, abs=1e-12)
        # |exp(-x^2)|^2 falls to half at sqrt(ln2/2)
        assert wx == pytest.approx(np.sqrt(np.log(2) / 2), abs=2e-3)

    def test_translation_equivariance(self):
        g1 = grid_with(lambda x, z: np.exp(-(x**2) - z**2))
        g2 = grid_with(lambda x, z: np.exp(-((x - 0.8) ** 2) - z**2))
        c1, w1 = centroid_and_width(g1, "x")
        c2, w2 = centroid_and_width(g2, "x")
        assert c2 - c1 == pytest.approx(0.8, abs=1e-9)
        assert w2 == pytest.approx(w1, abs=1e-9)

    def test_scale_invariance(self):
        g1 = grid_with(lambda x, z: np.exp(-(x**2) - z**2))
        g2 = grid_with(lambda x, z: 17.3 * np.exp(-(x**2) - z**2))
        assert centroid_and_width(g1, "x") == pytest.approx(centroid_and_width(g2, "x"))
        assert centroid_and_width(g1, "z") == pytest.approx(centroid_and_width(g2, "z"))

    def test_phase_invariance(self):
        g1 = grid_with(lambda x, z: np.exp(-(x**2) - z**2))
        g2 = grid_with(lambda x, z: np.exp(-(x**2) - z**2) * np.exp(1j * 0.7))
        assert centroid_and_width(g1, "z") == pytest.approx(centroid_and_width(g2, "z"))

    def test_zero_grid_raises(self):
        g = grid_with(lambda x, z: 0.0 * x * z)
        with pytest.raises(DiagnosticsError):
            centroid_and_width(g, "x")

    def test_bad_axis(self):
        g = grid_with(lambda x, z: np.exp(-(x**2) - z**2))
        with pytest.raises(ValueError):
            centroid_and_width(g, "y")


class TestExcitationNumbers:
    def test_zero_state(self):
        g = FieldGrid(0, 0.1, 11, 0, 0.1, 11)
        state = SolverState(0.0, g, g.zeros_like(), g.zeros_like(), FULL_MB)
        assert excitation_numbers(state) == (0.0, 0.0, 0.0)

    def test_component_weights(self):
        g = FieldGrid(0, 0.5, 2, 0, 0.5, 2)
        state = SolverState(0.0, g.zeros_like(), g.zeros_like(), g.zeros_like(), FULL_MB)
        state.E.values[0, 0] = 2.0
        state.psi_q.values[1, 1] = 1.0j
        n_E, n_e, n_q = excitation_numbers(state)
        assert n_E == pytest.approx(1.0)
        assert n_e == 0.0
        assert n_q == pytest.approx(0.25)


class TestPolaritonRatio:
    def fig_spec(self):
        return MediumSpec(
            control1=ControlLaser(0.0, 1.0, 1.0, "+z"),
            vg_profile=GaussianDipProfile(1.0, 0.95, 2.0, 1.0),
            constants=PhysicsConstants(g=1.0, c=100.0, v0=0.1),
        )

    def test_characteristics_state_satisfies_ratio(self):
        spec = self.fig_spec()
        grid = FieldGrid(-3.0, 12.0 / 200, 201, 0.0, 4.0 / 200, 201)
        cmap = build_characteristic_map(spec, grid.x0, grid.x_max, grid.z0, grid.z_max)
        probe = ProbeSpec(z1=0.0, x_center=0.0, x_halfwidth=0.3, t_center=5.0, t_halfwidth=2.0)
        fields = fields_on_grid(9.0, grid.x_nodes(), grid.z_nodes(), probe, cmap, spec)
        state = SolverState(9.0, grid.zeros_like(), grid.zeros_like(), grid.zeros_like(), FULL_MB)
        state.E.values = fields["E"].astype(complex)
        state.psi_q.values = fields["psi_q"].astype(complex)
        assert polariton_ratio_check(state, spec) < 1e-9

    def test_zero_state_well_defined(self):
        spec = self.fig_spec()
        g = FieldGrid(-3.0, 0.1, 61, 0.0, 0.1, 41)
        state = SolverState(0.0, g, g.zeros_like(), g.zeros_like(), FULL_MB)
        assert polariton_ratio_check(state, spec) == 0.0


class TestReportPlumbing:
    def test_entry_lines_and_keyvalues(self):
        rep = GeometryReport(entries=[
            ReportEntry("stored z centroid", 1.0, 1.02),
            ReportEntry("retrieved width", None, None, note="no second laser"),
        ])
        text = rep.to_text()
        assert "stored z centroid" in text and "not applicable" in text
        kv = rep.to_keyvalues()
        assert "stored_z_centroid.applicable=true" in kv
        assert "retrieved_width.applicable=false" in kv
        assert rep.entry("stored z centroid").rel_deviation == pytest.approx(0.02 / 1.02)

    def test_escaping_run_flags_inapplicable(self):
        # optically thin medium: no storage plane exists
        spec = MediumSpec(
            control1=ControlLaser(0.0, 1.0, 1.0, "+z"),
            vg_profile=GaussianDipProfile(base=1.0),
            constants=PhysicsConstants(g=1.0, c=100.0, v0=0.1),
        )
        grid = FieldGrid(-2.0, 6.0 / 80, 81, 0.0, 2.0 / 80, 81)
        probe = ProbeSpec(z1=0.0, x_center=0.0, x_halfwidth=0.3, t_center=2.0, t_halfwidth=1.0)
        from polsim.solver import SolverConfig, run

        snaps = run(SolverConfig(mode=ADVECTION, t_end=4.0, snapshot_every=2.0), spec, probe, grid)
        cmap = build_characteristic_map(spec, grid.x0, grid.x_max, grid.z0, grid.z_max)
        rep = verify_geometry(snaps, probe, cmap, spec, dz_atom=2.0)
        assert rep.entry("storage margin").note.endswith("escapes")
        assert rep.entry("stored z centroid").measured is None
        assert rep.entry("x drift slope").measured is None

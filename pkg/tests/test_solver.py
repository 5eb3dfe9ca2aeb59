import numpy as np
import pytest

from polsim.core import ADVECTION, FULL_MB, FieldGrid, PhysicsConstants, SolverState
from polsim.characteristics import ProbeSpec, build_characteristic_map, fields_on_grid
from polsim.medium import ControlLaser, GaussianDipProfile, MediumSpec
from polsim.solver import (
    SolverConfig,
    SolverError,
    adiabatic_residual,
    cfl_bounds,
    make_polariton_state,
    physical_probe_field,
    run,
    snapshot_times,
    step_advection,
    step_full,
)
from polsim.diagnostics import centroid_and_width, excitation_numbers


def flat_medium(vg=0.5, v0=0.0, beam_width=1e6, amplitude=1.0, gamma=0.0):
    return MediumSpec(
        control1=ControlLaser(0.0, beam_width, amplitude, "+z"),
        vg_profile=GaussianDipProfile(base=vg),
        constants=PhysicsConstants(g=1.0, c=100.0, v0=v0, gamma=gamma),
    )


def small_grid(nx=101, nz=151, xw=(-2.0, 2.0), zw=(0.0, 6.0)):
    return FieldGrid(xw[0], (xw[1] - xw[0]) / (nx - 1), nx, zw[0], (zw[1] - zw[0]) / (nz - 1), nz)


def gaussian_state(grid, xc=0.0, zc=1.0, wx=0.5, wz=0.4, mode=ADVECTION):
    xs, zs = grid.x_nodes(), grid.z_nodes()
    state = SolverState(0.0, grid.zeros_like(), grid.zeros_like(), grid.zeros_like(), mode)
    state.E.values = np.exp(
        -(((xs[:, None] - xc) / wx) ** 2) - ((zs[None, :] - zc) / wz) ** 2
    ).astype(complex)
    return state


class TestSnapshotTimes:
    def test_regular_cadence(self):
        assert snapshot_times(50.0, 5.0) == [0.0, 5.0, 10.0, 15.0, 20.0, 25.0, 30.0, 35.0, 40.0, 45.0, 50.0]

    def test_t_end_always_included(self):
        times = snapshot_times(7.0, 3.0)
        assert times[0] == 0.0 and times[-1] == 7.0

    def test_zero_t_end(self):
        assert snapshot_times(0.0, 5.0) == [0.0]


class TestAdvection:
    def test_constant_coefficient_z_translation(self):
        spec = flat_medium(vg=0.5, v0=0.0)
        grid = small_grid()
        init = gaussian_state(grid, zc=1.0)
        snaps = run(SolverConfig(mode=ADVECTION, t_end=4.0, snapshot_every=2.0), spec, None, grid,
                    initial_state=init)
        cz0, _ = centroid_and_width(snaps[0].E, "z")
        cz1, _ = centroid_and_width(snaps[-1].E, "z")
        assert cz1 - cz0 == pytest.approx(0.5 * 4.0, abs=grid.dz)

    def test_pure_spin_drift_at_v0(self):
        # control beam far away: a ~ 0, the excitation only drifts in x
        spec = MediumSpec(
            control1=ControlLaser(-60.0, 1.0, 1.0, "+z"),
            vg_profile=GaussianDipProfile(base=0.5),
            constants=PhysicsConstants(g=1.0, c=100.0, v0=0.25),
        )
        grid = small_grid()
        init = gaussian_state(grid, xc=-0.5, zc=2.0)
        snaps = run(SolverConfig(mode=ADVECTION, t_end=4.0, snapshot_every=1.0), spec, None, grid,
                    initial_state=init)
        times = [s.t for s in snaps]
        cxs = [centroid_and_width(s.E, "x")[0] for s in snaps]
        slope = np.polyfit(times, cxs, 1)[0]
        assert slope == pytest.approx(0.25, rel=1e-3)
        czs = [centroid_and_width(s.E, "z")[0] for s in snaps]
        assert czs[-1] == pytest.approx(czs[0], abs=1e-6)

    def test_cfl_violation_names_bound(self):
        spec = flat_medium(vg=0.5, v0=0.0)
        grid = small_grid()
        state = gaussian_state(grid)
        with pytest.raises(SolverError, match="dz"):
            step_advection(state, spec, None, dt=1e3)

    def test_mode_mismatch_rejected(self):
        spec = flat_medium()
        grid = small_grid()
        state = gaussian_state(grid, mode=FULL_MB)
        with pytest.raises(SolverError, match="advection"):
            step_advection(state, spec, None, dt=1e-3)

    def test_no_new_extrema_beyond_inflow(self):
        # discrete maximum principle of the first-order upwind update
        spec = MediumSpec(
            control1=ControlLaser(0.0, 1.0, 1.0, "+z"),
            vg_profile=GaussianDipProfile(1.0, 0.95, 2.0, 1.0),
            constants=PhysicsConstants(g=1.0, c=100.0, v0=0.1),
            control2=ControlLaser(8.0, 1.0, 1.0, "-z"),
        )
        grid = FieldGrid(-2.0, 12.0 / 120, 121, 0.0, 4.0 / 120, 121)
        rng = np.random.default_rng(5)
        state = SolverState(0.0, grid.zeros_like(), grid.zeros_like(), grid.zeros_like(), ADVECTION)
        # smooth random field, strictly interior
        raw = rng.normal(size=(121, 121))
        from scipy.ndimage import gaussian_filter

        state.E.values = gaussian_filter(raw, 6).astype(complex)
        peak0 = float(np.abs(state.E.values).max())
        probe = ProbeSpec(z1=0.0, x_center=0.0, x_halfwidth=0.3, t_center=2.0, t_halfwidth=1.0, amplitude=0.5)
        snaps = run(SolverConfig(mode=ADVECTION, t_end=3.0, snapshot_every=3.0), spec, probe, grid,
                    initial_state=state)
        boundary_max = 0.5 / spec.control1.rabi(0.0)
        assert float(np.abs(snaps[-1].E.values).max()) <= max(peak0, boundary_max) + 1e-12

    def test_direction_flip_reverses_retrieval(self):
        # mini storage-and-release run; the released pulse's z-centroid
        # velocity follows the second laser's direction
        def mini(direction2):
            spec = MediumSpec(
                control1=ControlLaser(0.0, 1.0, 1.0, "+z"),
                vg_profile=GaussianDipProfile(1.0, 0.95, 2.0, 1.0),
                constants=PhysicsConstants(g=1.0, c=100.0, v0=0.1),
                z1=0.6,
                control2=ControlLaser(5.0, 1.0, 1.0, direction2),
            )
            grid = FieldGrid(-1.8, 8.6 / 120, 121, 0.6, 2.25 / 120, 121)
            probe = ProbeSpec(z1=0.6, x_center=0.0, x_halfwidth=0.33, t_center=-2.0, t_halfwidth=16.0)
            snaps = run(SolverConfig(mode=ADVECTION, t_end=50.0, snapshot_every=5.0), spec, probe, grid)
            e45 = snaps[-2].E.zeros_like()
            e45.values = physical_probe_field(snaps[-2], spec)
            e50 = snaps[-1].E.zeros_like()
            e50.values = physical_probe_field(snaps[-1], spec)
            return (centroid_and_width(e50, "z")[0] - centroid_and_width(e45, "z")[0]) / 5.0

        assert mini("+z") > 0
        assert mini("-z") < 0

    def test_determinism_bitwise(self):
        spec = flat_medium(vg=0.5, v0=0.1, beam_width=2.0)
        grid = small_grid(nx=61, nz=61)
        probe = ProbeSpec(z1=0.0, x_center=0.0, x_halfwidth=0.5, t_center=2.0, t_halfwidth=1.0)
        a = run(SolverConfig(mode=ADVECTION, t_end=2.0, snapshot_every=1.0), spec, probe, grid)
        b = run(SolverConfig(mode=ADVECTION, t_end=2.0, snapshot_every=1.0), spec, probe, grid)
        for sa, sb in zip(a, b):
            assert np.array_equal(sa.E.values, sb.E.values)

    def test_convergence_toward_characteristics(self):
        # relative L2 error against the closed-form transport shrinks
        # roughly first order under grid refinement
        spec = MediumSpec(
            control1=ControlLaser(0.0, 1.0, 1.0, "+z"),
            vg_profile=GaussianDipProfile(1.0, 0.8, 1.5, 1.0),
            constants=PhysicsConstants(g=1.0, c=100.0, v0=0.15),
        )
        probe = ProbeSpec(z1=0.0, x_center=0.0, x_halfwidth=0.33, t_center=0.0, t_halfwidth=6.0)
        errors = []
        for n in (60, 120, 240):
            grid = FieldGrid(-1.5, 5.0 / (n - 1), n, 0.0, 3.0 / (n - 1), n)
            snaps = run(SolverConfig(mode=ADVECTION, t_end=12.0, snapshot_every=4.0), spec, probe, grid)
            cmap = build_characteristic_map(spec, grid.x0, grid.x_max, grid.z0, grid.z_max)
            num = den = 0.0
            for s in snaps:
                ref = fields_on_grid(s.t, grid.x_nodes(), grid.z_nodes(), probe, cmap, spec)["E_tilde"]
                num += np.sum(np.abs(s.E.values - ref) ** 2)
                den += np.sum(np.abs(ref) ** 2)
            errors.append(np.sqrt(num / den))
        assert errors[0] > errors[1] > errors[2]
        order = np.log2(errors[1] / errors[2])
        assert 0.5 < order < 1.5


class TestFullMB:
    def test_decoupled_limit_advects_E_at_c(self):
        # amplitude ~ 0 kills the coupling (g enters only through the
        # derived density, which scales with the control amplitude)
        spec = flat_medium(vg=1e6, v0=0.0, amplitude=1e-9)
        grid = FieldGrid(-2.0, 4.0 / 40, 41, 0.0, 8.0 / 400, 401)
        state = gaussian_state(grid, zc=2.0, wz=0.8, mode=FULL_MB)
        state.psi_q.values[:] = 0.3  # uncoupled spin field must stay put
        snaps = run(SolverConfig(mode=FULL_MB, t_end=0.03, snapshot_every=0.03, cfl_safety=0.9),
                    spec, None, grid, initial_state=state)
        cz0, _ = centroid_and_width(snaps[0].E, "z")
        cz1, _ = centroid_and_width(snaps[-1].E, "z")
        assert cz1 - cz0 == pytest.approx(100.0 * 0.03, abs=2 * grid.dz)
        assert np.allclose(snaps[-1].psi_q.values, 0.3)

    def test_counter_propagating_second_laser_rejected(self):
        spec = MediumSpec(
            control1=ControlLaser(0.0, 1.0, 1.0, "+z"),
            vg_profile=GaussianDipProfile(base=0.5),
            constants=PhysicsConstants(g=1.0, c=100.0, v0=0.0),
            control2=ControlLaser(8.0, 1.0, 1.0, "-z"),
        )
        grid = small_grid(nx=41, nz=41)
        state = gaussian_state(grid, mode=FULL_MB)
        with pytest.raises(SolverError, match="co-propagating"):
            step_full(state, spec, None, dt=1e-5)

    def test_nan_detection_aborts_with_step(self):
        spec = flat_medium(vg=0.5, v0=0.0, beam_width=2.0, amplitude=1.0)
        grid = small_grid(nx=41, nz=41)
        state = gaussian_state(grid, mode=FULL_MB)
        state.psi_e.values[5, 5] = np.nan
        with pytest.raises(SolverError, match="step"):
            step_full(state, spec, None, dt=1e-5)

    def test_conservation_and_decay(self):
        grid = FieldGrid(-1.6, 3.2 / 48, 49, 0.0, 3.0 / 96, 97)

        def env(x, z):
            return 0.01 * np.exp(-((x / 0.5) ** 2) - ((z - 1.0) / 0.8) ** 2)

        spec0 = MediumSpec(
            control1=ControlLaser(0.0, 1.0, 5.0, "+z"),
            vg_profile=GaussianDipProfile(base=0.05),
            constants=PhysicsConstants(g=1.0, c=100.0, v0=0.0, gamma=0.0),
        )
        state = make_polariton_state(grid, spec0, env)
        snaps = run(SolverConfig(mode=FULL_MB, t_end=0.4, snapshot_every=0.1, cfl_safety=0.9),
                    spec0, None, grid, initial_state=state)
        totals = [sum(excitation_numbers(s)) for s in snaps]
        drift = abs(totals[-1] - totals[0]) / totals[0]
        assert drift < 1e-3

        # switching on the excited-state decay makes the total strictly fall
        spec_g = MediumSpec(
            control1=spec0.control1, vg_profile=spec0.vg_profile,
            constants=PhysicsConstants(g=1.0, c=100.0, v0=0.0, gamma=2.0),
        )
        snaps_g = run(SolverConfig(mode=FULL_MB, t_end=0.4, snapshot_every=0.1, cfl_safety=0.9),
                      spec_g, None, grid, initial_state=make_polariton_state(grid, spec_g, env))
        totals_g = [sum(excitation_numbers(s)) for s in snaps_g]
        assert all(b < a for a, b in zip(totals_g[:-1], totals_g[1:]))
        # the dark state is decay-protected, so the loss is small but real
        assert (totals_g[0] - totals_g[-1]) / totals_g[0] > 1e-4

    def test_recoil_drift_term_toggles(self):
        grid = small_grid(nx=41, nz=81, zw=(0.0, 3.0))

        def env(x, z):
            return 0.01 * np.exp(-((x / 0.5) ** 2) - ((z - 1.5) / 0.5) ** 2)

        spec = MediumSpec(
            control1=ControlLaser(0.0, 1.0, 5.0, "+z"),
            vg_profile=GaussianDipProfile(base=0.05),
            constants=PhysicsConstants(g=1.0, c=100.0, v0=0.0, v_r=0.5),
        )
        state = make_polariton_state(grid, spec, env)
        base = run(SolverConfig(mode=FULL_MB, t_end=0.1, snapshot_every=0.1, cfl_safety=0.9),
                   spec, None, grid, initial_state=state)
        with_vr = run(SolverConfig(mode=FULL_MB, t_end=0.1, snapshot_every=0.1, cfl_safety=0.9,
                                   v_r_enabled=True),
                      spec, None, grid, initial_state=state)
        assert not np.allclose(base[-1].psi_e.values, with_vr[-1].psi_e.values)

    def test_adiabatic_residual_zero_state(self):
        spec = flat_medium(vg=0.05, v0=0.0, beam_width=1.0, amplitude=5.0)
        grid = small_grid(nx=41, nz=41)
        state = SolverState(0.0, grid.zeros_like(), grid.zeros_like(), grid.zeros_like(), FULL_MB)
        r_q, r_e = adiabatic_residual(state, spec)
        assert r_q == 0.0 and r_e == 0.0

    def test_full_mb_cfl_includes_coupling_scales(self):
        spec = flat_medium(vg=0.05, v0=0.1, beam_width=1.0, amplitude=5.0)
        grid = small_grid(nx=41, nz=41)
        bounds = cfl_bounds(FULL_MB, grid, spec)
        assert "dz/c" in bounds and "1/Omega_max" in bounds and "1/(g sqrt n)_max" in bounds
        assert "dx/v0" in bounds

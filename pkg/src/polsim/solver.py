"""Direct finite-difference engines.

Two modes share the stepping/snapshot machinery:

* advection: the single polariton transport equation for the auxiliary
  amplitude, (d/dt + vg(z) a(x) d/dz + v0 d/dx) Etilde = 0, with
  first-order upwind differences in both directions.  The sign of
  vg(z) a(x) picks the upwind side per node, which is what lets a
  counter-propagating second control beam drive the retrieved pulse
  back toward -z.
* full-MB: the coupled probe/exciton system with advection handled by
  the same upwind sweeps and the local interaction advanced pointwise
  by the exact matrix exponential of the per-node coupling (Strang
  split around the transport).  With gamma = delta = 0 the pointwise
  propagator is exactly unitary, so total excitation is conserved up
  to transport dissipation and boundary flux.

Stepping is deterministic: plain sequential numpy, no threading, fixed
summation order.  Snapshot times are hit exactly by subdividing each
snapshot interval into an integer number of equal steps.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, List, Optional

import numpy as np

from polsim.characteristics import build_characteristic_map, fields_on_grid, ProbeSpec
from polsim.core import ADVECTION, FULL_MB, FieldGrid, PolsimError, SolverState
from polsim.medium import MediumSpec, shape_combined


class SolverError(PolsimError):
    """CFL violation, non-finite fields, or inconsistent solver setup."""


@dataclass(frozen=True)
class SolverConfig:
    """Time-stepping controls; dt is derived from the CFL bound unless given."""

    mode: str = ADVECTION
    t_end: float = 50.0
    snapshot_every: float = 5.0
    dt: Optional[float] = None
    cfl_safety: float = 0.8
    v_r_enabled: bool = False

    def __post_init__(self):
        if self.mode not in (ADVECTION, FULL_MB):
            raise SolverError(f"unknown solver mode {self.mode!r}")
        if self.t_end < 0:
            raise SolverError("t_end must be nonnegative")
        if self.snapshot_every <= 0:
            raise SolverError("snapshot_every must be positive")
        if not (0 < self.cfl_safety < 1):
            raise SolverError("cfl_safety must lie in (0, 1)")
        if self.dt is not None and self.dt <= 0:
            raise SolverError("dt must be positive")


# ----------------------------------------------------------------------
# CFL bounds
# ----------------------------------------------------------------------

def cfl_bounds(mode: str, grid: FieldGrid, spec: MediumSpec, v_r_enabled: bool = False) -> dict:
    """Per-term explicit-stability bounds on dt, keyed by a readable name."""
    consts = spec.constants
    x = grid.x_nodes()
    z = grid.z_nodes()
    bounds: dict = {}
    if mode == ADVECTION:
        s_max = float(np.max(np.abs(np.asarray(spec.vg(z))[None, :] * shape_combined(x, spec)[:, None])))
        if s_max > 0:
            bounds["dz/max|vg a|"] = grid.dz / s_max
        if consts.v0 > 0:
            bounds["dx/v0"] = grid.dx / consts.v0
    else:
        bounds["dz/c"] = grid.dz / consts.c
        if consts.v0 > 0:
            bounds["dx/v0"] = grid.dx / consts.v0
        om_max = float(np.sqrt(np.max(spec.omega_squared(x))))
        if om_max > 0:
            bounds["1/Omega_max"] = 1.0 / om_max
        gn_max = float(np.max(spec.g_sqrt_n(z)))
        if gn_max > 0:
            bounds["1/(g sqrt n)_max"] = 1.0 / gn_max
        mod_det = abs(complex(consts.Delta, -consts.gamma))
        if mod_det > 0:
            bounds["1/|Delta - i gamma|"] = 1.0 / mod_det
        if consts.delta != 0:
            bounds["1/|delta|"] = 1.0 / abs(consts.delta)
        if v_r_enabled and consts.v_r > 0:
            bounds["dz/v_r"] = grid.dz / consts.v_r
    return bounds


def _check_dt(dt: float, mode: str, grid: FieldGrid, spec: MediumSpec, safety: float, v_r_enabled: bool) -> None:
    for name, bound in cfl_bounds(mode, grid, spec, v_r_enabled).items():
        if dt > safety * bound * (1 + 1e-12):
            raise SolverError(
                f"CFL violation: dt = {dt:g} exceeds safety * ({name}) = {safety * bound:g}"
            )


# ----------------------------------------------------------------------
# Upwind sweeps (first order)
# ----------------------------------------------------------------------

def _sweep_z(E: np.ndarray, s_pos: np.ndarray, s_neg: np.ndarray, dt_over_dz: float) -> np.ndarray:
    """Upwind z transport with signed speed s = s_pos + s_neg.

    Backward differences where s > 0 (zero handled trivially), forward
    differences where s < 0 with a zero ghost row above the top (open
    boundary: nothing enters from +z).  Row j = 0 is left to the caller
    where s > 0 (Dirichlet inflow plane).
    """
    out = E.copy()
    out[:, 1:] -= dt_over_dz * s_pos[:, 1:] * (E[:, 1:] - E[:, :-1])
    out[:, :-1] -= dt_over_dz * s_neg[:, :-1] * (E[:, 1:] - E[:, :-1])
    out[:, -1] -= dt_over_dz * s_neg[:, -1] * (-E[:, -1])
    return out


def _sweep_x(E: np.ndarray, v0: float, dt_over_dx: float) -> np.ndarray:
    """Upwind x transport at v0 >= 0 with a zero ghost column at -x."""
    if v0 == 0:
        return E
    out = E.copy()
    nu = v0 * dt_over_dx
    out[1:, :] -= nu * (E[1:, :] - E[:-1, :])
    out[0, :] -= nu * E[0, :]
    return out


# ----------------------------------------------------------------------
# Advection engine
# ----------------------------------------------------------------------

class _AdvectionEngine:
    def __init__(self, grid: FieldGrid, spec: MediumSpec, probe: Optional[ProbeSpec],
                 cmap=None):
        self.spec = spec
        self.probe = probe
        self.x = grid.x_nodes()
        self.z = grid.z_nodes()
        self.dx = grid.dx
        self.dz = grid.dz
        s = np.asarray(spec.vg(self.z))[None, :] * shape_combined(self.x, spec)[:, None]
        self.s_pos = np.where(s > 0, s, 0.0)
        self.s_neg = np.where(s < 0, s, 0.0)
        self.inflow_mask = s[:, 0] > 0
        self.om1 = spec.control1.rabi(spec.x1)
        self.v0 = spec.constants.v0
        # inflow data: the advected amplitude on the entry plane is the
        # probe envelope traced along the characteristic coordinates; off
        # the first beam's axis this shears the transverse/temporal
        # arguments (for a static medium the plain envelope remains)
        self._xi_row = None
        self._tau_shift = None
        if probe is not None and self.v0 > 0:
            if cmap is None:
                cmap = build_characteristic_map(spec, grid.x0, grid.x_max, grid.z0, grid.z_max)
            A_row = np.asarray(cmap.A(self.x))
            self._xi_row = A_row
            self._tau_shift = (A_row - self.x) / self.v0

    def boundary_row(self, t: float) -> np.ndarray:
        if self.probe is None:
            return np.zeros_like(self.x)
        if self._xi_row is None:
            return self.probe.envelope(self.x, t) / self.om1
        return self.probe.envelope(self._xi_row, t + self._tau_shift) / self.om1

    def step(self, values: np.ndarray, t: float, dt: float) -> np.ndarray:
        out = _sweep_z(values, self.s_pos, self.s_neg, dt / self.dz)
        out = _sweep_x(out, self.v0, dt / self.dx)
        row = self.boundary_row(t + dt)
        out[self.inflow_mask, 0] = row[self.inflow_mask]
        return out


def step_advection(state: SolverState, spec: MediumSpec, probe: Optional[ProbeSpec], dt: float,
                   cfl_safety: float = 0.8) -> SolverState:
    """One upwind step of the polariton transport; E holds the auxiliary field."""
    if state.mode != ADVECTION:
        raise SolverError("step_advection needs a state in advection mode")
    _check_dt(dt, ADVECTION, state.E, spec, cfl_safety, False)
    engine = _AdvectionEngine(state.E, spec, probe)
    new = state.copy()
    new.E.values = engine.step(state.E.values, state.t, dt)
    new.t = state.t + dt
    _slave_spin_wave(new, spec)
    return new


def _slave_spin_wave(state: SolverState, spec: MediumSpec) -> None:
    """Fill psi_q = -g sqrt(n(z)) Etilde; psi_e stays zero in advection mode."""
    gn = np.asarray(spec.g_sqrt_n(state.E.z_nodes()))[None, :]
    state.psi_q.values = -gn * state.E.values
    state.psi_e.values.fill(0.0)


def physical_probe_field(state: SolverState, spec: MediumSpec) -> np.ndarray:
    """Project the advected auxiliary amplitude back to the probe field E."""
    if state.mode != ADVECTION:
        return state.E.values
    a = shape_combined(state.E.x_nodes(), spec)[:, None]
    return np.sqrt(np.abs(a)) * spec.control1.rabi(spec.x1) * state.E.values


# ----------------------------------------------------------------------
# Full Maxwell-Bloch engine
# ----------------------------------------------------------------------

def _expm_stack(K: np.ndarray) -> np.ndarray:
    """exp(K) for a (..., 3, 3) stack via scaling and squaring + Taylor.

    The per-node coupling norms are bounded by the CFL guards, so a
    modest Taylor order after scaling reaches machine precision.
    """
    norm = float(np.max(np.sum(np.abs(K), axis=-1))) if K.size else 0.0
    squarings = max(0, int(math.ceil(math.log2(norm / 0.25))) if norm > 0.25 else 0)
    M = K / (2 ** squarings)
    eye = np.broadcast_to(np.eye(3, dtype=complex), M.shape).copy()
    result = eye.copy()
    term = eye.copy()
    for k in range(1, 13):
        term = np.matmul(term, M) / k
        result += term
    for _ in range(squarings):
        result = np.matmul(result, result)
    return result


class _FullMBEngine:
    def __init__(self, grid: FieldGrid, spec: MediumSpec, probe: Optional[ProbeSpec], v_r_enabled: bool):
        if spec.control2 is not None and spec.control2.direction != "+z":
            raise SolverError(
                "full-MB mode supports only co-propagating control lasers; "
                "model a counter-propagating second beam with the advection engine"
            )
        self.spec = spec
        self.probe = probe
        self.x = grid.x_nodes()
        self.z = grid.z_nodes()
        self.dx = grid.dx
        self.dz = grid.dz
        consts = spec.constants
        self.c = consts.c
        self.v0 = consts.v0
        self.v_r = consts.v_r if v_r_enabled else 0.0
        self.omega = np.sqrt(spec.omega_squared(self.x))  # (nx,)
        self.gn = np.asarray(spec.g_sqrt_n(self.z))  # (nz,)
        self._half_kick = None
        self._half_kick_dt = None
        # constant z speeds reused by the sweeps
        self._c_pos = np.full((self.x.size, self.z.size), self.c)
        self._zero = np.zeros((self.x.size, self.z.size))
        if self.v_r > 0:
            self._vr_pos = np.full((self.x.size, self.z.size), self.v_r)

    def half_kick(self, dt: float) -> np.ndarray:
        if self._half_kick is None or self._half_kick_dt != dt:
            consts = self.spec.constants
            nx, nz = self.x.size, self.z.size
            K = np.zeros((nx, nz, 3, 3), dtype=complex)
            gn = np.broadcast_to(self.gn[None, :], (nx, nz))
            om = np.broadcast_to(self.omega[:, None], (nx, nz))
            K[..., 0, 1] = 1j * gn
            K[..., 1, 0] = 1j * gn
            K[..., 1, 1] = -(1j * consts.Delta + consts.gamma)
            K[..., 1, 2] = 1j * om
            K[..., 2, 1] = 1j * om
            K[..., 2, 2] = -1j * consts.delta
            self._half_kick = _expm_stack(K * (0.5 * dt))
            self._half_kick_dt = dt
        return self._half_kick

    def _apply_kick(self, P: np.ndarray, E, psi_e, psi_q):
        F = np.stack([E, psi_e, psi_q], axis=-1)  # (nx, nz, 3)
        F = np.einsum("ijab,ijb->ija", P, F)
        return F[..., 0], F[..., 1], F[..., 2]

    def step(self, E: np.ndarray, psi_e: np.ndarray, psi_q: np.ndarray, t: float, dt: float):
        P = self.half_kick(dt)
        E, psi_e, psi_q = self._apply_kick(P, E, psi_e, psi_q)
        E = _sweep_z(E, self._c_pos, self._zero, dt / self.dz)
        psi_e = _sweep_x(psi_e, self.v0, dt / self.dx)
        if self.v_r > 0:
            psi_e = _sweep_z(psi_e, self._vr_pos, self._zero, dt / self.dz)
            psi_e[:, 0] = 0.0
        psi_q = _sweep_x(psi_q, self.v0, dt / self.dx)
        E, psi_e, psi_q = self._apply_kick(P, E, psi_e, psi_q)
        if self.probe is not None:
            E[:, 0] = self.probe.envelope(self.x, t + dt)
        else:
            E[:, 0] = 0.0
        return E, psi_e, psi_q


def step_full(state: SolverState, spec: MediumSpec, probe: Optional[ProbeSpec], dt: float,
              cfl_safety: float = 0.8, v_r_enabled: bool = False) -> SolverState:
    """One explicit step of the coupled probe/exciton system."""
    if state.mode != FULL_MB:
        raise SolverError("step_full needs a state in full-MB mode")
    _check_dt(dt, FULL_MB, state.E, spec, cfl_safety, v_r_enabled)
    engine = _FullMBEngine(state.E, spec, probe, v_r_enabled)
    new = state.copy()
    E, pe, pq = engine.step(state.E.values, state.psi_e.values, state.psi_q.values, state.t, dt)
    _assert_finite(E, pe, pq, step_index=0, t=state.t + dt)
    new.E.values, new.psi_e.values, new.psi_q.values = E, pe, pq
    new.t = state.t + dt
    return new


def _assert_finite(*arrays: np.ndarray, step_index: int, t: float) -> None:
    for arr in arrays:
        if not np.all(np.isfinite(arr)):
            raise SolverError(f"non-finite field value detected at step {step_index} (t = {t:g})")


# ----------------------------------------------------------------------
# Run driver
# ----------------------------------------------------------------------

def snapshot_times(t_end: float, every: float) -> List[float]:
    n = int(math.floor(t_end / every + 1e-9))
    ts = [k * every for k in range(n + 1)]
    if ts[-1] < t_end - 1e-12:
        ts.append(t_end)
    return ts


def make_advection_initial_state(
    grid: FieldGrid, spec: MediumSpec, probe: Optional[ProbeSpec], t: float = 0.0, cmap=None
) -> SolverState:
    """Advection-mode state at time t seeded from the characteristics solution.

    The transport equation's exact solution provides the consistent
    initial data (identically zero whenever the probe has not yet
    entered); a static medium (v0 = 0) has no characteristics map and
    seeds zero.
    """
    state = SolverState(
        t=t, E=grid.zeros_like(), psi_e=grid.zeros_like(), psi_q=grid.zeros_like(), mode=ADVECTION
    )
    if probe is not None and spec.constants.v0 > 0:
        if cmap is None:
            cmap = build_characteristic_map(spec, grid.x0, grid.x_max, grid.z0, grid.z_max)
        fields = fields_on_grid(t, grid.x_nodes(), grid.z_nodes(), probe, cmap, spec)
        state.E.values = fields["E_tilde"].astype(complex)
    _slave_spin_wave(state, spec)
    return state


def run(
    config: SolverConfig,
    spec: MediumSpec,
    probe: Optional[ProbeSpec],
    grid: FieldGrid,
    initial_state: Optional[SolverState] = None,
    progress: Optional[Callable[[float, float], None]] = None,
) -> List[SolverState]:
    """Step from t = 0 to t_end, returning a snapshot every snapshot_every.

    The grid argument fixes the geometry (its values are ignored unless
    it is passed as part of initial_state).  Identical inputs produce
    bit-identical snapshots.
    """
    spec.validate_window(grid.z0, grid.z_max)
    if probe is not None:
        probe.check_against(spec)

    cmap = None
    if config.mode == ADVECTION and probe is not None and spec.constants.v0 > 0:
        cmap = build_characteristic_map(spec, grid.x0, grid.x_max, grid.z0, grid.z_max)

    if initial_state is not None:
        state = initial_state.copy()
        if state.mode != config.mode:
            raise SolverError("initial state mode does not match config mode")
        if not state.E.same_geometry(grid):
            raise SolverError("initial state grid geometry does not match the run grid")
    elif config.mode == ADVECTION:
        state = make_advection_initial_state(grid, spec, probe, cmap=cmap)
    else:
        state = SolverState(
            t=0.0, E=grid.zeros_like(), psi_e=grid.zeros_like(), psi_q=grid.zeros_like(), mode=FULL_MB
        )

    bounds = cfl_bounds(config.mode, grid, spec, config.v_r_enabled)
    dt_limit = config.cfl_safety * min(bounds.values()) if bounds else config.snapshot_every
    dt_target = config.dt if config.dt is not None else dt_limit
    _check_dt(dt_target, config.mode, grid, spec, config.cfl_safety, config.v_r_enabled)

    if config.mode == ADVECTION:
        engine = _AdvectionEngine(grid, spec, probe, cmap=cmap)
    else:
        engine = _FullMBEngine(grid, spec, probe, config.v_r_enabled)

    def emit(s: SolverState) -> SolverState:
        snap = s.copy()
        if config.mode == ADVECTION:
            _slave_spin_wave(snap, spec)
        return snap

    snapshots = [emit(state)]
    times = snapshot_times(config.t_end, config.snapshot_every)
    step_index = 0
    for t_prev, t_next in zip(times[:-1], times[1:]):
        seg = t_next - t_prev
        n_steps = max(1, int(math.ceil(seg / dt_target - 1e-9)))
        dt = seg / n_steps
        if config.mode == ADVECTION:
            vals = state.E.values
            for k in range(n_steps):
                vals = engine.step(vals, t_prev + k * dt, dt)
                step_index += 1
            state.E.values = vals
        else:
            E, pe, pq = state.E.values, state.psi_e.values, state.psi_q.values
            for k in range(n_steps):
                E, pe, pq = engine.step(E, pe, pq, t_prev + k * dt, dt)
                step_index += 1
                if step_index % 64 == 0:
                    _assert_finite(E, pe, pq, step_index=step_index, t=t_prev + (k + 1) * dt)
            _assert_finite(E, pe, pq, step_index=step_index, t=t_next)
            state.E.values, state.psi_e.values, state.psi_q.values = E, pe, pq
        state.t = t_next
        snapshots.append(emit(state))
        if progress is not None:
            progress(t_next, config.t_end)
    return snapshots


# ----------------------------------------------------------------------
# Adiabaticity diagnostics
# ----------------------------------------------------------------------

def make_polariton_state(
    grid: FieldGrid, spec: MediumSpec, envelope: Callable[[np.ndarray, np.ndarray], np.ndarray]
) -> SolverState:
    """Deep-adiabatic full-MB state from a smooth auxiliary envelope f(x, z).

    Sets E = Omega(x) f, psi_q = -g sqrt(n) f and psi_e from the
    traveling-polariton estimate, i.e. the adiabatic hierarchy truncated
    at first order.
    """
    x = grid.x_nodes()
    z = grid.z_nodes()
    f = np.asarray(envelope(x[:, None], z[None, :]), dtype=complex)
    om = np.sqrt(spec.omega_squared(x))[:, None]
    gn = np.asarray(spec.g_sqrt_n(z))[None, :]
    s = np.asarray(spec.vg(z))[None, :] * shape_combined(x, spec)[:, None]
    df_dz = np.gradient(f, grid.dz, axis=1)
    state = SolverState(
        t=0.0, E=grid.zeros_like(), psi_e=grid.zeros_like(), psi_q=grid.zeros_like(), mode=FULL_MB
    )
    state.E.values = om * f
    state.psi_q.values = -gn * f
    state.psi_e.values = -1j * (gn / om) * s * df_dz
    return state


def adiabatic_residual(
    state: SolverState,
    spec: MediumSpec,
    prev_state: Optional[SolverState] = None,
    mask_fraction: float = 0.01,
):
    """Relative departure of (psi_q, psi_e) from the adiabatic hierarchy.

    r_q compares psi_q against -g sqrt(n) Etilde; r_e compares psi_e
    against the first-order prediction built from (v0 d/dx + d/dt)
    Etilde, the time derivative taken from prev_state when supplied and
    otherwise from the transport equation's substitute -vg a dEtilde/dz.
    Both norms are restricted to nodes whose excitation density exceeds
    mask_fraction of its maximum.
    """
    x = state.E.x_nodes()
    z = state.E.z_nodes()
    om = np.sqrt(spec.omega_squared(x))[:, None]
    gn = np.asarray(spec.g_sqrt_n(z))[None, :]
    E = state.E.values
    etilde = E / om

    density = np.abs(E) ** 2 + np.abs(state.psi_e.values) ** 2 + np.abs(state.psi_q.values) ** 2
    peak = float(density.max())
    if peak == 0.0:
        return 0.0, 0.0
    mask = density >= mask_fraction * peak

    resid_q = state.psi_q.values + gn * etilde
    norm_q = np.sqrt(np.sum(np.abs(state.psi_q.values[mask]) ** 2))
    r_q = float(np.sqrt(np.sum(np.abs(resid_q[mask]) ** 2)) / norm_q) if norm_q > 0 else 0.0

    v0 = spec.constants.v0
    detilde_dx = np.gradient(etilde, state.E.dx, axis=0) if v0 > 0 else 0.0
    if prev_state is not None and prev_state.t != state.t:
        dt = state.t - prev_state.t
        detilde_dt = (etilde - prev_state.E.values / om) / dt
    else:
        s = np.asarray(spec.vg(z))[None, :] * shape_combined(x, spec)[:, None]
        detilde_dt = -s * np.gradient(etilde, state.E.dz, axis=1) - v0 * detilde_dx
    pred_e = 1j * (gn / om) * (v0 * detilde_dx + detilde_dt)
    resid_e = state.psi_e.values - pred_e
    norm_e = np.sqrt(np.sum(np.abs(state.psi_e.values[mask]) ** 2))
    eps = 1e-300
    r_e = float(np.sqrt(np.sum(np.abs(resid_e[mask]) ** 2)) / (norm_e + eps))
    if norm_e == 0.0:
        r_e = 0.0
    return r_q, r_e

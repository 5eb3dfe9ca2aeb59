"""INI run configuration: parsing, validation, canonical serialization.

Sections: grid, medium, control1, control2 (optional), probe, physics,
solver, output.  Unknown keys are rejected naming section and key; all
numeric parsing is locale-independent.  Width keys follow the Gaussian
1/e half-width convention documented in the README.
"""

from __future__ import annotations

import configparser
import math
from dataclasses import dataclass, field
from io import StringIO
from typing import Optional

from polsim.characteristics import ProbeSpec
from polsim.core import FieldGrid, PhysicsConstants, PolsimError
from polsim.medium import ControlLaser, GaussianDipProfile, MediumSpec
from polsim.solver import SolverConfig

FORMAT_VERSION = 1


class ConfigError(PolsimError):
    """Malformed or invalid run configuration."""


@dataclass(frozen=True)
class GridSection:
    x_min: float
    x_max: float
    z_min: float
    z_max: float
    nx: int
    nz: int


@dataclass(frozen=True)
class ControlSection:
    center: float
    width: float
    amplitude: float
    direction: str = "+z"


@dataclass(frozen=True)
class RunConfig:
    grid: GridSection
    vg_base: float
    vg_dip_depth: float
    vg_dip_center: float
    vg_dip_width: float
    v0: float
    g: float
    c: float
    z1: float
    control1: ControlSection
    control2: Optional[ControlSection]
    probe_x_center: float
    probe_x_halfwidth: float
    probe_t_center: float
    probe_t_halfwidth: float
    probe_amplitude: float
    delta: float
    Delta: float
    gamma: float
    v_r: float
    v_r_enabled: bool
    mode: str
    dt: Optional[float]
    cfl_safety: float
    t_end: float
    snapshot_every: float
    out_directory: str
    format_version: int = FORMAT_VERSION

    # ----- domain object builders -------------------------------------

    def build_grid(self) -> FieldGrid:
        g = self.grid
        return FieldGrid(
            x0=g.x_min,
            dx=(g.x_max - g.x_min) / (g.nx - 1),
            nx=g.nx,
            z0=g.z_min,
            dz=(g.z_max - g.z_min) / (g.nz - 1),
            nz=g.nz,
        )

    def build_constants(self) -> PhysicsConstants:
        return PhysicsConstants(
            g=self.g, c=self.c, v0=self.v0, v_r=self.v_r,
            delta=self.delta, Delta=self.Delta, gamma=self.gamma,
        )

    def build_medium(self) -> MediumSpec:
        c1 = ControlLaser(
            self.control1.center, self.control1.width, self.control1.amplitude, self.control1.direction
        )
        c2 = None
        if self.control2 is not None:
            c2 = ControlLaser(
                self.control2.center, self.control2.width, self.control2.amplitude, self.control2.direction
            )
        profile = GaussianDipProfile(
            base=self.vg_base,
            dip_depth=self.vg_dip_depth,
            dip_center=self.vg_dip_center,
            dip_width=self.vg_dip_width,
        )
        return MediumSpec(
            control1=c1, vg_profile=profile, constants=self.build_constants(), z1=self.z1, control2=c2
        )

    def build_probe(self) -> ProbeSpec:
        return ProbeSpec(
            z1=self.z1,
            x_center=self.probe_x_center,
            x_halfwidth=self.probe_x_halfwidth,
            t_center=self.probe_t_center,
            t_halfwidth=self.probe_t_halfwidth,
            amplitude=self.probe_amplitude,
        )

    def build_solver_config(self) -> SolverConfig:
        return SolverConfig(
            mode=self.mode,
            t_end=self.t_end,
            snapshot_every=self.snapshot_every,
            dt=self.dt,
            cfl_safety=self.cfl_safety,
            v_r_enabled=self.v_r_enabled,
        )


_SCHEMA = {
    "grid": {"x_min", "x_max", "z_min", "z_max", "nx", "nz"},
    "medium": {"vg_base", "vg_dip_depth", "vg_dip_center", "vg_dip_width", "v0", "g", "c", "z1"},
    "control1": {"center", "width", "amplitude", "direction"},
    "control2": {"center", "width", "amplitude", "direction"},
    "probe": {"x_center", "x_hwhm", "t_center", "t_hwhm", "amplitude"},
    "physics": {"delta", "Delta", "gamma", "v_r", "v_r_enabled"},
    "solver": {"mode", "dt", "cfl_safety", "t_end", "snapshot_every"},
    "output": {"directory", "format_version"},
}
_REQUIRED_SECTIONS = ("grid", "medium", "control1", "probe", "physics", "solver", "output")


class _SectionReader:
    def __init__(self, parser: configparser.ConfigParser, name: str):
        self.name = name
        self.raw = dict(parser.items(name)) if parser.has_section(name) else {}

    def _get(self, key: str, default=None, required: bool = False) -> Optional[str]:
        if key in self.raw:
            return self.raw[key]
        if required:
            raise ConfigError(f"{self.name}.{key}: missing required key")
        return default

    def number(self, key: str, default=None, required: bool = False) -> Optional[float]:
        text = self._get(key, required=required)
        if text is None:
            return default
        try:
            value = float(text)
        except ValueError:
            raise ConfigError(f"{self.name}.{key}: not a number: {text!r}") from None
        if not math.isfinite(value):
            raise ConfigError(f"{self.name}.{key}: non-finite number: {text!r}")
        return value

    def integer(self, key: str, required: bool = False, default=None) -> Optional[int]:
        text = self._get(key, required=required)
        if text is None:
            return default
        try:
            return int(text)
        except ValueError:
            raise ConfigError(f"{self.name}.{key}: not an integer: {text!r}") from None

    def boolean(self, key: str, default: bool = False) -> bool:
        text = self._get(key)
        if text is None:
            return default
        low = text.strip().lower()
        if low in ("true", "yes", "on", "1"):
            return True
        if low in ("false", "no", "off", "0"):
            return False
        raise ConfigError(f"{self.name}.{key}: not a boolean: {text!r}")

    def string(self, key: str, default=None, required: bool = False) -> Optional[str]:
        return self._get(key, default=default, required=required)


def _positive(section: str, key: str, value: float) -> float:
    if value <= 0:
        raise ConfigError(f"{section}.{key}: must be positive, got {value:g}")
    return value


def parse_config(text: str) -> RunConfig:
    """Parse and validate a sectioned key=value configuration."""
    parser = configparser.ConfigParser(interpolation=None, strict=True)
    parser.optionxform = str  # keep key case: delta and Delta are distinct
    try:
        parser.read_string(text)
    except configparser.Error as exc:
        raise ConfigError(f"config syntax error: {exc}") from None

    for section in parser.sections():
        if section not in _SCHEMA:
            raise ConfigError(f"unknown section [{section}]")
        for key in parser.options(section):
            if key not in _SCHEMA[section]:
                raise ConfigError(f"{section}.{key}: unknown key")
    for section in _REQUIRED_SECTIONS:
        if not parser.has_section(section):
            raise ConfigError(f"missing required section [{section}]")

    grid_r = _SectionReader(parser, "grid")
    grid = GridSection(
        x_min=grid_r.number("x_min", required=True),
        x_max=grid_r.number("x_max", required=True),
        z_min=grid_r.number("z_min", required=True),
        z_max=grid_r.number("z_max", required=True),
        nx=grid_r.integer("nx", required=True),
        nz=grid_r.integer("nz", required=True),
    )
    if grid.x_max <= grid.x_min:
        raise ConfigError("grid.x_max: must exceed grid.x_min")
    if grid.z_max <= grid.z_min:
        raise ConfigError("grid.z_max: must exceed grid.z_min")
    if grid.nx < 2 or grid.nz < 2:
        raise ConfigError("grid.nx/grid.nz: need at least 2 nodes per axis")

    med = _SectionReader(parser, "medium")
    vg_base = _positive("medium", "vg_base", med.number("vg_base", required=True))
    vg_dip_depth = med.number("vg_dip_depth", default=0.0)
    if not (0 <= vg_dip_depth < 1):
        raise ConfigError(f"medium.vg_dip_depth: must lie in [0, 1), got {vg_dip_depth:g}")
    vg_dip_center = med.number("vg_dip_center", default=0.0)
    vg_dip_width = _positive("medium", "vg_dip_width", med.number("vg_dip_width", default=1.0))
    v0 = med.number("v0", required=True)
    if v0 < 0:
        raise ConfigError(f"medium.v0: must be nonnegative, got {v0:g}")
    g_const = med.number("g", default=1.0)
    c_const = _positive("medium", "c", med.number("c", default=100.0))
    z1 = med.number("z1", default=grid.z_min)

    def control(name: str) -> Optional[ControlSection]:
        if not parser.has_section(name):
            return None
        r = _SectionReader(parser, name)
        width = _positive(name, "width", r.number("width", required=True))
        amplitude = r.number("amplitude", required=True)
        if amplitude < 0:
            raise ConfigError(f"{name}.amplitude: must be nonnegative, got {amplitude:g}")
        direction = r.string("direction", default="+z")
        if direction not in ("+z", "-z"):
            raise ConfigError(f"{name}.direction: must be '+z' or '-z', got {direction!r}")
        return ControlSection(
            center=r.number("center", required=True), width=width, amplitude=amplitude, direction=direction
        )

    control1 = control("control1")
    if control1.direction != "+z":
        raise ConfigError("control1.direction: the first control laser must propagate along +z")
    control2 = control("control2")

    probe = _SectionReader(parser, "probe")
    probe_x_center = probe.number("x_center", required=True)
    probe_x_halfwidth = _positive("probe", "x_hwhm", probe.number("x_hwhm", required=True))
    probe_t_center = probe.number("t_center", required=True)
    probe_t_halfwidth = _positive("probe", "t_hwhm", probe.number("t_hwhm", required=True))
    probe_amplitude = probe.number("amplitude", default=1.0)

    phys = _SectionReader(parser, "physics")
    delta = phys.number("delta", default=0.0)
    Delta = phys.number("Delta", default=0.0)
    gamma = phys.number("gamma", default=0.0)
    if gamma < 0:
        raise ConfigError(f"physics.gamma: must be nonnegative, got {gamma:g}")
    v_r = phys.number("v_r", default=0.0)
    if v_r < 0:
        raise ConfigError(f"physics.v_r: must be nonnegative, got {v_r:g}")
    v_r_enabled = phys.boolean("v_r_enabled", default=False)

    sol = _SectionReader(parser, "solver")
    mode = sol.string("mode", default="advection")
    if mode not in ("advection", "full-MB"):
        raise ConfigError(f"solver.mode: must be 'advection' or 'full-MB', got {mode!r}")
    dt = sol.number("dt", default=None)
    if dt is not None and dt <= 0:
        raise ConfigError(f"solver.dt: must be positive, got {dt:g}")
    cfl_safety = sol.number("cfl_safety", default=0.8)
    if not (0 < cfl_safety < 1):
        raise ConfigError(f"solver.cfl_safety: must lie in (0, 1), got {cfl_safety:g}")
    t_end = sol.number("t_end", required=True)
    if t_end < 0:
        raise ConfigError(f"solver.t_end: must be nonnegative, got {t_end:g}")
    snapshot_every = _positive("solver", "snapshot_every", sol.number("snapshot_every", required=True))

    out = _SectionReader(parser, "output")
    directory = out.string("directory", default="run-output")
    format_version = out.integer("format_version", default=FORMAT_VERSION)
    if format_version != FORMAT_VERSION:
        raise ConfigError(f"output.format_version: unsupported version {format_version}")

    if not (grid.z_min <= z1 <= grid.z_max):
        raise ConfigError("medium.z1: entry plane must lie inside the z window")

    return RunConfig(
        grid=grid,
        vg_base=vg_base,
        vg_dip_depth=vg_dip_depth,
        vg_dip_center=vg_dip_center,
        vg_dip_width=vg_dip_width,
        v0=v0,
        g=g_const,
        c=c_const,
        z1=z1,
        control1=control1,
        control2=control2,
        probe_x_center=probe_x_center,
        probe_x_halfwidth=probe_x_halfwidth,
        probe_t_center=probe_t_center,
        probe_t_halfwidth=probe_t_halfwidth,
        probe_amplitude=probe_amplitude,
        delta=delta,
        Delta=Delta,
        gamma=gamma,
        v_r=v_r,
        v_r_enabled=v_r_enabled,
        mode=mode,
        dt=dt,
        cfl_safety=cfl_safety,
        t_end=t_end,
        snapshot_every=snapshot_every,
        out_directory=directory,
        format_version=format_version,
    )


def _num(value: float) -> str:
    return "0" if value == 0 else repr(float(value))


def serialize_config(cfg: RunConfig) -> str:
    """Canonical text form; parse(serialize(parse(s))) == parse(s)."""
    buf = StringIO()

    def section(name: str, pairs) -> None:
        buf.write(f"[{name}]\n")
        for key, value in pairs:
            if value is None:
                continue
            if isinstance(value, bool):
                text = "true" if value else "false"
            elif isinstance(value, int):
                text = str(value)
            elif isinstance(value, float):
                text = _num(value)
            else:
                text = str(value)
            buf.write(f"{key} = {text}\n")
        buf.write("\n")

    g = cfg.grid
    section("grid", [("x_min", g.x_min), ("x_max", g.x_max), ("z_min", g.z_min),
                     ("z_max", g.z_max), ("nx", g.nx), ("nz", g.nz)])
    section("medium", [("vg_base", cfg.vg_base), ("vg_dip_depth", cfg.vg_dip_depth),
                       ("vg_dip_center", cfg.vg_dip_center), ("vg_dip_width", cfg.vg_dip_width),
                       ("v0", cfg.v0), ("g", cfg.g), ("c", cfg.c), ("z1", cfg.z1)])
    section("control1", [("center", cfg.control1.center), ("width", cfg.control1.width),
                         ("amplitude", cfg.control1.amplitude), ("direction", cfg.control1.direction)])
    if cfg.control2 is not None:
        section("control2", [("center", cfg.control2.center), ("width", cfg.control2.width),
                             ("amplitude", cfg.control2.amplitude), ("direction", cfg.control2.direction)])
    section("probe", [("x_center", cfg.probe_x_center), ("x_hwhm", cfg.probe_x_halfwidth),
                      ("t_center", cfg.probe_t_center), ("t_hwhm", cfg.probe_t_halfwidth),
                      ("amplitude", cfg.probe_amplitude)])
    section("physics", [("delta", cfg.delta), ("Delta", cfg.Delta), ("gamma", cfg.gamma),
                        ("v_r", cfg.v_r), ("v_r_enabled", cfg.v_r_enabled)])
    section("solver", [("mode", cfg.mode), ("dt", cfg.dt), ("cfl_safety", cfg.cfl_safety),
                       ("t_end", cfg.t_end), ("snapshot_every", cfg.snapshot_every)])
    section("output", [("directory", cfg.out_directory), ("format_version", cfg.format_version)])
    return buf.getvalue()

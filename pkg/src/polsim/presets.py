"""Access to the preset configuration files shipped with the package."""

from __future__ import annotations

from importlib import resources
from pathlib import Path

from polsim.config import RunConfig, parse_config


def preset_path(name: str) -> Path:
    """Filesystem path of a shipped preset (e.g. 'fig2', 'fig3')."""
    candidate = resources.files("polsim") / "presets" / f"{name}.cfg"
    with resources.as_file(candidate) as path:
        if not path.exists():
            raise FileNotFoundError(f"no preset named {name!r}")
        return Path(path)


def load_preset(name: str) -> RunConfig:
    return parse_config(preset_path(name).read_text(encoding="utf-8"))


def preset_names() -> list:
    base = resources.files("polsim") / "presets"
    return sorted(p.name[:-4] for p in base.iterdir() if p.name.endswith(".cfg"))

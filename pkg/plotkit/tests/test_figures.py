"""Acceptance-style tests: render real simulator output.

These drive the simulator through its command line (the only interface
this package consumes besides the file formats) and then render the
resulting snapshot trees.
"""

import shutil
import subprocess
import sys

import numpy as np
import pytest

from plotkit.render import render_panels
from plotkit.snapshots import read_field_file, read_trajectory_file, scan_run

POLSIM = shutil.which("polsim")

pytestmark = pytest.mark.skipif(POLSIM is None, reason="polsim CLI not installed")


def run_polsim(*args):
    proc = subprocess.run([POLSIM, *args], capture_output=True, text=True)
    assert proc.returncode == 0, proc.stderr
    return proc


@pytest.fixture(scope="module")
def preset_dir():
    out = subprocess.run(
        [sys.executable, "-c", "from polsim.presets import preset_path; print(preset_path('fig2').parent)"],
        capture_output=True, text=True,
    )
    assert out.returncode == 0, out.stderr
    from pathlib import Path

    return Path(out.stdout.strip())


@pytest.fixture(scope="module")
def fig_runs(tmp_path_factory, preset_dir):
    """fig2 and fig3 preset runs plus characteristics output for fig2."""
    base = tmp_path_factory.mktemp("figruns")
    dirs = {}
    for name in ("fig2", "fig3"):
        rundir = base / name
        run_polsim("run", str(preset_dir / f"{name}.cfg"), "--out", str(rundir))
        dirs[name] = rundir
    return dirs


@pytest.fixture(scope="module")
def storage_run(tmp_path_factory, preset_dir):
    """Single-beam storage run plus its characteristic trajectories."""
    base = tmp_path_factory.mktemp("storage")
    rundir = base / "run"
    chardir = base / "char"
    cfg = str(preset_dir / "geo_storage.cfg")
    run_polsim("run", cfg, "--out", str(rundir))
    run_polsim("characteristics", cfg, "--out", str(chardir))
    return rundir, chardir


class TestFigurePanels:
    @pytest.mark.parametrize("name", ["fig2", "fig3"])
    @pytest.mark.parametrize("field", ["E", "psi_q"])
    def test_eleven_panels_render(self, fig_runs, tmp_path, name, field):
        rundir = fig_runs[name]
        assert len(scan_run(rundir)) == 11  # t = 0, 5, ..., 50
        out = tmp_path / f"{name}_{field}.png"
        render_panels(rundir, field, out)
        assert out.exists() and out.stat().st_size > 50_000

    def test_cli_render_with_overlay(self, storage_run, tmp_path):
        rundir, chardir = storage_run
        out = tmp_path / "storage.png"
        proc = subprocess.run(
            [
                shutil.which("polsim-plot"), "render", str(rundir),
                "--field", "psi_q", "--out", str(out),
                "--trajectory", str(chardir / "trajectory_00.dat"),
            ],
            capture_output=True, text=True,
        )
        assert proc.returncode == 0, proc.stderr
        assert out.exists()


class TestOverlayGeometry:
    def test_central_trajectory_passes_through_stored_centroid(self, storage_run):
        rundir, chardir = storage_run
        xi0, pts = read_trajectory_file(chardir / "trajectory_00.dat")
        assert xi0 == 0.0
        by_time = scan_run(rundir)
        last_t = max(by_time)
        spin = read_field_file(by_time[last_t]["psi_q"])
        w = np.abs(spin.values) ** 2
        xs = spin.x0 + spin.dx * np.arange(spin.nx)
        zs = spin.z0 + spin.dz * np.arange(spin.nz)
        cx = float(np.sum(xs[:, None] * w) / np.sum(w))
        cz = float(np.sum(zs[None, :] * w) / np.sum(w))
        # trajectory height at the centroid's x, by interpolation
        z_on_traj = float(np.interp(cx, pts[:, 0], pts[:, 1]))
        assert abs(z_on_traj - cz) <= 2 * spin.dz, (
            f"central trajectory off the stored wave: |{z_on_traj:.4f} - {cz:.4f}| > 2*dz"
        )

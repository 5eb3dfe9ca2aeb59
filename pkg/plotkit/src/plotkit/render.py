"""Multi-panel |field| heatmaps with optional trajectory overlays.

One panel per snapshot time, all panels sharing a single color scale
normalized over the whole run so the compression and dragging of the
excitation stays visually comparable across times.
"""

from __future__ import annotations

import math
from pathlib import Path
from typing import List, Optional, Sequence, Tuple

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np

from plotkit.snapshots import PlotkitError, read_field_file, read_trajectory_file, scan_run


def _load_series(snapshot_dir: Path, field: str):
    by_time = scan_run(snapshot_dir)
    times = sorted(by_time)
    missing = [f"t={t:g}" for t in times if field not in by_time[t]]
    if missing:
        raise PlotkitError(
            f"field {field!r} missing at snapshot times: " + ", ".join(missing)
        )
    frames = []
    bad = []
    for t in times:
        try:
            frames.append(read_field_file(by_time[t][field]))
        except PlotkitError as exc:
            bad.append(str(exc))
    if bad:
        raise PlotkitError("corrupt snapshot files:\n" + "\n".join(bad))
    first = frames[0]
    for fr in frames[1:]:
        if fr.extent != first.extent or fr.nx != first.nx or fr.nz != first.nz:
            raise PlotkitError(f"{fr.path.name}: grid differs from the first snapshot")
    return frames


def render_panels(
    snapshot_dir: Path,
    field: str,
    out_image: Path,
    trajectories: Optional[Sequence[Path]] = None,
    columns: int = 4,
    cmap: str = "inferno",
    dpi: int = 130,
) -> Path:
    """Render one |field| panel per snapshot time into a raster image.

    Optional trajectory files are drawn over every panel; the central
    level (xi0 = 0) is highlighted.  All inputs are validated before
    anything is written, so a failure leaves no partial image behind.
    """
    frames = _load_series(Path(snapshot_dir), field)
    polylines: List[Tuple[float, np.ndarray]] = []
    for tpath in trajectories or []:
        polylines.append(read_trajectory_file(Path(tpath)))

    vmax = max(float(np.abs(fr.values).max()) for fr in frames)
    if vmax == 0.0:
        vmax = 1.0
    n = len(frames)
    cols = min(columns, n)
    rows = math.ceil(n / cols)
    extent = frames[0].extent
    # imshow wants (rows=z, cols=x) with origin at the lower left
    imshow_extent = (extent[0], extent[1], extent[2], extent[3])

    fig, axes = plt.subplots(
        rows, cols, figsize=(3.2 * cols, 2.6 * rows), squeeze=False, constrained_layout=True
    )
    im = None
    for k, fr in enumerate(frames):
        ax = axes[k // cols][k % cols]
        im = ax.imshow(
            np.abs(fr.values).T,
            origin="lower",
            extent=imshow_extent,
            aspect="auto",
            vmin=0.0,
            vmax=vmax,
            cmap=cmap,
        )
        for xi0, pts in polylines:
            if pts.size == 0:
                continue
            central = abs(xi0) < 1e-12
            ax.plot(
                pts[:, 0],
                pts[:, 1],
                color="cyan" if central else "white",
                linewidth=1.4 if central else 0.7,
                alpha=0.95 if central else 0.6,
            )
        ax.set_xlim(extent[0], extent[1])
        ax.set_ylim(extent[2], extent[3])
        ax.set_title(f"t = {fr.t:g}", fontsize=9)
        if k // cols == rows - 1:
            ax.set_xlabel("x")
        if k % cols == 0:
            ax.set_ylabel("z")
    for k in range(n, rows * cols):
        axes[k // cols][k % cols].set_axis_off()
    if not polylines:
        note = ""
    else:
        note = ", trajectories overlaid (cyan: central level)"
    fig.suptitle(f"|{field}| over the x-z plane{note}", fontsize=11)
    fig.colorbar(im, ax=[a for row in axes for a in row], shrink=0.85, label=f"|{field}|")

    out_image = Path(out_image)
    out_image.parent.mkdir(parents=True, exist_ok=True)
    fig.savefig(out_image, dpi=dpi)
    plt.close(fig)
    return out_image


def overlay_trajectories(
    snapshot_dir: Path,
    field: str,
    trajectory_files: Sequence[Path],
    out_image: Path,
    **kwargs,
) -> Path:
    """Render panels with the given trajectory polylines drawn on top.

    Trajectories must live inside the panels' axis bounds; a mismatched
    window is rejected rather than silently clipped.
    """
    frames = _load_series(Path(snapshot_dir), field)
    extent = frames[0].extent
    for tpath in trajectory_files:
        _, pts = read_trajectory_file(Path(tpath))
        if pts.size == 0:
            continue
        eps = 1e-9
        if (
            pts[:, 0].min() < extent[0] - eps
            or pts[:, 0].max() > extent[1] + eps
            or pts[:, 1].min() < extent[2] - eps
            or pts[:, 1].max() > extent[3] + eps
        ):
            raise PlotkitError(
                f"{Path(tpath).name}: trajectory exceeds the panel bounds {extent}"
            )
    return render_panels(snapshot_dir, field, out_image, trajectories=trajectory_files, **kwargs)

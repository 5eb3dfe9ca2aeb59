"""Figure rendering for polsim snapshot directories.

Consumes the text formats the simulator publishes (snapshot format v1
and trajectory files); nothing here imports the simulator itself.
"""

from plotkit.snapshots import FieldFile, PlotkitError, read_field_file, scan_run
from plotkit.render import overlay_trajectories, render_panels

__version__ = "0.1.0"

__all__ = [
    "FieldFile",
    "PlotkitError",
    "read_field_file",
    "scan_run",
    "render_panels",
    "overlay_trajectories",
    "__version__",
]

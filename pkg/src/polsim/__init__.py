"""Slow-light storage and retrieval in a moving EIT medium.

Two engines over a shared (x, z) grid: a semi-analytic characteristics
propagator and a direct finite-difference integrator (polariton advection
or full Maxwell-Bloch), plus diagnostics that check the geometric
predictions (storage plane, spin-wave dimensions, retrieval width and
direction) against the simulated fields.
"""

from polsim.core import FieldGrid, PhysicsConstants, SolverState, grid_interpolate, l2_norm

__version__ = "0.1.0"

__all__ = [
    "FieldGrid",
    "PhysicsConstants",
    "SolverState",
    "grid_interpolate",
    "l2_norm",
    "__version__",
]

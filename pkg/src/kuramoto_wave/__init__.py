"""Traveling waves of the finite-N Kuramoto model with symmetric quenched disorder."""

__version__ = "0.1.0"

from .disorder import DisorderLaw, DisorderSample, from_assignments, make_law, sample_iid  # noqa: E402
from .spaces import GridSpec, ProfileField, SignedMeasureField, default_grid  # noqa: E402
from .stationary import StationaryProfile, build_profile, solve_r  # noqa: E402
from .linops import SpectralModel, assemble_L, drift_b, proj_M  # noqa: E402

__all__ = [
    "DisorderLaw",
    "DisorderSample",
    "GridSpec",
    "ProfileField",
    "SignedMeasureField",
    "SpectralModel",
    "StationaryProfile",
    "assemble_L",
    "build_profile",
    "default_grid",
    "drift_b",
    "from_assignments",
    "make_law",
    "proj_M",
    "sample_iid",
    "solve_r",
]

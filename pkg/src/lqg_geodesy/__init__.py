"""Lattice laboratory for Liouville first-passage percolation and LQG geodesics."""

__version__ = "0.1.0"

from .config import RunConfig, RunManifest  # noqa: E402
from .experiments import run_experiment  # noqa: E402

__all__ = ["RunConfig", "RunManifest", "run_experiment", "__version__"]

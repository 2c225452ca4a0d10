"""Lattice experiments for perimeter plus self-transport energies."""
from .lattice import LatticeSet, ball_set, face_perimeter, volume
from .reduction import energy_T, total_T
from .transport import wasserstein_distance, wasserstein_functional

__version__ = "0.1.0"

__all__ = [
    "LatticeSet",
    "ball_set",
    "energy_T",
    "face_perimeter",
    "total_T",
    "volume",
    "wasserstein_distance",
    "wasserstein_functional",
]

"""Resonance eigenvalue toolkit for Neumann matrix Schrodinger operators on boxes."""

from .lattice import BoxDomain, canonicalize, enumerate_ball, is_minimal_in_direction, norm_sq
from .potential import MatrixPotential, load_potential, mean_eigensystem
from .resonance import ParameterSchedule, classify, sample_single_resonance, single_resonance_check

__all__ = [
    "BoxDomain",
    "MatrixPotential",
    "ParameterSchedule",
    "canonicalize",
    "classify",
    "enumerate_ball",
    "is_minimal_in_direction",
    "load_potential",
    "mean_eigensystem",
    "norm_sq",
    "sample_single_resonance",
    "single_resonance_check",
]

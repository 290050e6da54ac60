"""Lateral path tracking and string stability of vehicle platoons in the arc-length domain."""

from .model import LINCOLN_MKZ, ErrorState, VehicleParams, build_matrices
from .control import GainSet, reference_gains

__version__ = "0.1.0"

__all__ = ["LINCOLN_MKZ", "ErrorState", "VehicleParams", "build_matrices", "GainSet", "reference_gains"]

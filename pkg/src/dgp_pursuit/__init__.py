"""Distributed GP-assisted pursuit of a moving target by a camera-drone network."""

from .geometry import Pose, compose, integrate, inverse, vec_of
from .gp_expert import Dataset, GpExpert, HyperParams, fit, predict
from .network import DroneGraph, h_matrix, laplacian
from .pursuit_control import ErrorState, Gains, control_law

__version__ = "0.1.0"

__all__ = [
    "Pose", "compose", "integrate", "inverse", "vec_of",
    "Dataset", "GpExpert", "HyperParams", "fit", "predict",
    "DroneGraph", "h_matrix", "laplacian",
    "ErrorState", "Gains", "control_law",
]

from .conversions import distance_to_error, error_to_distance, reconstruct_coordinate, sphere_area
from .cpd import (
    CpdContext,
    cpd_derivative_fd,
    cpd_eval,
    cpd_invert,
    derivative_lower_bound,
)

__all__ = [
    "CpdContext",
    "cpd_derivative_fd",
    "cpd_eval",
    "cpd_invert",
    "derivative_lower_bound",
    "distance_to_error",
    "error_to_distance",
    "reconstruct_coordinate",
    "sphere_area",
]

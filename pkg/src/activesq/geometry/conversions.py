"""Closed-form relations between halfspace error, normal distance and coordinates."""

from __future__ import annotations

import math

import numpy as np

from ..core import UnitVector


def error_to_distance(alpha: float) -> float:
    """Distance between unit normals whose halfspaces disagree on a fraction alpha of the sphere."""
    if not 0.0 <= alpha <= 1.0:
        raise ValueError(f"error must lie in [0, 1], got {alpha}")
    return 2.0 * math.sin(math.pi * alpha / 2.0)


def distance_to_error(delta: float) -> float:
    """Inverse of :func:`error_to_distance`."""
    if not 0.0 <= delta <= 2.0:
        raise ValueError(f"distance must lie in [0, 2], got {delta}")
    return 2.0 * math.asin(delta / 2.0) / math.pi


def reconstruct_coordinate(v: UnitVector, u: UnitVector, beta: float, dist_v: float, dist_vprime: float) -> float:
    """Recover <u, w> from |v - w| and |v' - w|, where v' = normalize(v + beta u).

    Uses <a, b> = 1 - |a - b|^2 / 2 for unit vectors, so the identity is exact
    when both distances are exact.
    """
    if not 0.0 < beta <= 0.5:
        raise ValueError(f"beta must lie in (0, 1/2], got {beta}")
    for name, val in (("dist_v", dist_v), ("dist_vprime", dist_vprime)):
        if not 0.0 <= val <= 2.0:
            raise ValueError(f"{name} must lie in [0, 2], got {val}")
    stretch = float(np.linalg.norm(v.coords + beta * u.coords))
    return (stretch * (2.0 - dist_vprime**2) - 2.0 + dist_v**2) / (2.0 * beta)


def sphere_area(k: int) -> float:
    """Surface area of the unit sphere S_k sitting in R^(k+1)."""
    if k < 0:
        raise ValueError("sphere dimension must be non-negative")
    return 2.0 * math.pi ** ((k + 1) / 2.0) / math.gamma((k + 1) / 2.0)

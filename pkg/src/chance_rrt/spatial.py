"""Planar obstacle beliefs built from fused detections."""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Optional, Sequence

import numpy as np

from .errors import DomainError
from .geometry import rotation
from .uncertainty import DetectionBelief

# index into the 7-element box vectors
_X, _Y, _W, _L, _THETA = 0, 1, 4, 5, 6

DEFAULT_PE_MAX = 0.5 * math.log(2.0)
DEFAULT_MI_MAX = 0.25 * math.log(2.0)


@dataclass(frozen=True, eq=False)
class ObstacleBelief:
    """Obstacle as seen by the planner.

    ``semi_axis_lon``/``semi_axis_lat`` are the uncertainty-inflated extents used
    for display; the risk evaluator uses the deterministic half extents plus
    ``covariance`` (world frame, m^2). ``velocity`` carries the constant-velocity
    prediction supplied by the scenario.
    """

    center: tuple[float, float]
    heading: float
    half_length: float
    half_width: float
    semi_axis_lon: float
    semi_axis_lat: float
    sigma_lon: float
    sigma_lat: float
    delta_a: float
    delta_b: float
    covariance: np.ndarray
    pe: float = 0.0
    mi: float = 0.0
    suspect: bool = False
    velocity: tuple[float, float] = (0.0, 0.0)
    source_id: Optional[str] = field(default=None, compare=False)


def lateral_longitudinal_sigma(var_x: float, var_y: float, var_w: float, var_l: float) -> tuple[float, float]:
    """Return ``(sigma_lat, sigma_lon)`` in metres."""
    if min(var_x, var_y, var_w, var_l) < 0:
        raise DomainError("variances must be non-negative")
    return math.sqrt(var_x + var_w), math.sqrt(var_y + var_l)


def orientation_margins(w: float, l: float, sigma_theta: float) -> tuple[float, float]:  # noqa: E741
    """Extra longitudinal/lateral extent ``(delta_a, delta_b)`` from yaw uncertainty."""
    if w <= 0 or l <= 0:
        raise DomainError("w and l must be positive")
    if not 0 <= sigma_theta < math.pi / 2:
        raise DomainError(f"sigma_theta must lie in [0, pi/2), got {sigma_theta}")
    t2 = math.tan(sigma_theta) ** 2
    delta_a = 0.5 * l * (1.0 - w * math.sqrt((1.0 + t2) / (w * w + l * l * t2)))
    # negative only when w > l; such boxes get no extra margin
    delta_a = max(delta_a, 0.0)
    return delta_a, (w / l) * delta_a


def make_obstacle_belief(
    belief: DetectionBelief,
    velocity: tuple[float, float] = (0.0, 0.0),
    source_id: Optional[str] = None,
) -> ObstacleBelief:
    var = belief.var_total
    box = belief.mean
    sigma_lat, sigma_lon = lateral_longitudinal_sigma(var[_X], var[_Y], var[_W], var[_L])
    delta_a, delta_b = orientation_margins(box.w, box.l, math.sqrt(var[_THETA]))
    std_lon = sigma_lon + delta_a
    std_lat = sigma_lat + delta_b
    rot = rotation(box.theta)
    cov = rot @ np.diag([std_lon**2, std_lat**2]) @ rot.T
    cov = 0.5 * (cov + cov.T)
    return ObstacleBelief(
        center=(box.x, box.y),
        heading=box.theta,
        half_length=0.5 * box.l,
        half_width=0.5 * box.w,
        semi_axis_lon=0.5 * box.l + std_lon,
        semi_axis_lat=0.5 * box.w + std_lat,
        sigma_lon=sigma_lon,
        sigma_lat=sigma_lat,
        delta_a=delta_a,
        delta_b=delta_b,
        covariance=cov,
        pe=belief.predictive_entropy,
        mi=belief.mutual_information,
        velocity=(float(velocity[0]), float(velocity[1])),
        source_id=source_id,
    )


def filter_misdetections(
    obstacles: Sequence[ObstacleBelief],
    pe_max: float = DEFAULT_PE_MAX,
    mi_max: float = DEFAULT_MI_MAX,
) -> tuple[list[ObstacleBelief], list[ObstacleBelief]]:
    """Split obstacles into ``(kept, rejected)``; equality with a threshold keeps."""
    if pe_max < 0 or mi_max < 0:
        raise DomainError("thresholds must be non-negative")
    kept, rejected = [], []
    for ob in obstacles:
        if ob.pe > pe_max or ob.mi > mi_max:
            rejected.append(replace(ob, suspect=True))
        else:
            kept.append(ob)
    return kept, rejected

"""Synthetic stand-in for a Bayesian 3D detector.

Every visible obstacle yields T perturbed box samples whose noise grows
linearly with range and with |sin(bearing)|; clutter objects produce samples
whose class votes disagree, which is what the PE/MI filter keys on.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Optional, Sequence

import numpy as np
from pydantic import ConfigDict

from .dynamics import EgoState
from .errors import DomainError
from .geometry import segment_hits_box, wrap_angle
from .uncertainty import BoxParams, DetectionSample

LOG_VAR_FLOOR = -80.0


@dataclass(frozen=True)
class GroundTruthObstacle:
    __pydantic_config__ = ConfigDict(extra="forbid")

    id: str
    x: float
    y: float
    heading: float = 0.0
    h: float = 1.5
    w: float = 1.8
    l: float = 4.5  # noqa: E741
    vx: float = 0.0
    vy: float = 0.0

    def __post_init__(self):
        if min(self.h, self.w, self.l) <= 0:
            raise DomainError(f"obstacle {self.id}: dimensions must be positive")

    def at(self, t: float) -> "GroundTruthObstacle":
        """Constant-velocity pose after ``t`` seconds."""
        if t == 0:
            return self
        return replace(self, x=self.x + self.vx * t, y=self.y + self.vy * t)


@dataclass(frozen=True)
class SensorNoiseProfile:
    """Noise law: std = sigma0 + k_dist * d + k_azimuth * |sin(bearing)|."""

    __pydantic_config__ = ConfigDict(extra="forbid")

    T: int = 6
    sigma0: float = 0.05
    k_dist: float = 0.01
    k_azimuth: float = 0.1
    theta_noise: float = 0.01
    misdetect_rate: float = 0.0
    occlusion_misdetect_rate: float = 0.0
    clutter_rate: float = 0.0
    max_range: float = 50.0
    n_classes: int = 2
    log_var_jitter: float = 0.1
    confidence_near: float = 0.99
    confidence_decay: float = 0.0015
    score_jitter: float = 0.005
    clutter_scatter: float = 2.0

    def __post_init__(self):
        if self.T < 1:
            raise DomainError("T must be at least 1")
        if self.n_classes < 2:
            raise DomainError("n_classes must be at least 2")
        rates = (self.sigma0, self.k_dist, self.k_azimuth, self.theta_noise, self.misdetect_rate,
                 self.occlusion_misdetect_rate, self.clutter_rate, self.log_var_jitter,
                 self.score_jitter, self.clutter_scatter)
        if min(rates) < 0:
            raise DomainError("noise parameters and rates must be non-negative")
        if self.misdetect_rate > 1 or self.occlusion_misdetect_rate > 1:
            raise DomainError("misdetection rates must not exceed 1")
        if self.max_range <= 0:
            raise DomainError("max_range must be positive")

    def position_sigma(self, distance: float, bearing: float) -> float:
        return self.sigma0 + self.k_dist * distance + self.k_azimuth * abs(math.sin(bearing))

    def yaw_sigma(self, distance: float) -> float:
        return self.theta_noise * (1.0 + self.k_dist * distance / 10.0)


@dataclass(frozen=True)
class DetectionSet:
    """Samples for one reported object; ``truth_id`` is None for clutter."""

    samples: list[DetectionSample]
    truth_id: Optional[str]
    velocity: tuple[float, float] = (0.0, 0.0)

    @property
    def is_clutter(self) -> bool:
        return self.truth_id is None


def _log_var(sigma: float) -> float:
    return 2.0 * math.log(sigma) if sigma > 0 else LOG_VAR_FLOOR


def _scores(argmax: int, confidence: float, n_classes: int) -> np.ndarray:
    rest = (1.0 - confidence) / (n_classes - 1)
    scores = np.full(n_classes, rest)
    scores[argmax] = confidence
    return scores


def _occluded(ego: EgoState, target: GroundTruthObstacle, others: Sequence[GroundTruthObstacle]) -> bool:
    p0, p1 = (ego.x, ego.y), (target.x, target.y)
    return any(
        segment_hits_box(p0, p1, o.x, o.y, o.heading, o.l / 2, o.w / 2)
        for o in others
        if o.id != target.id
    )


def _true_detection(ob: GroundTruthObstacle, d: float, bearing: float, profile: SensorNoiseProfile, rng) -> list:
    sigma = profile.position_sigma(d, bearing)
    sigma_yaw = profile.yaw_sigma(d)
    base = np.array([ob.x, ob.y, 0.5 * ob.h, ob.h, ob.w, ob.l, ob.heading])
    scale = np.array([sigma] * 6 + [sigma_yaw])
    lam_base = np.array([_log_var(sigma)] * 6 + [_log_var(sigma_yaw)])
    confidence = profile.confidence_near - profile.confidence_decay * d
    samples = []
    for _ in range(profile.T):
        box = base + scale * rng.standard_normal(7)
        box[3:6] = np.maximum(box[3:6], 0.1)
        lam = lam_base + profile.log_var_jitter * rng.standard_normal(7)
        conf = float(np.clip(confidence + profile.score_jitter * rng.standard_normal(), 0.5, 0.999))
        samples.append(DetectionSample(BoxParams.from_array(box), lam, _scores(0, conf, profile.n_classes)))
    return samples


def _clutter_detection(ego: EgoState, profile: SensorNoiseProfile, rng) -> list:
    r = profile.max_range * math.sqrt(rng.uniform())
    phi = rng.uniform(-math.pi, math.pi)
    cx, cy = ego.x + r * math.cos(phi), ego.y + r * math.sin(phi)
    yaw = rng.uniform(-math.pi, math.pi)
    scatter = profile.clutter_scatter
    lam = np.full(7, _log_var(scatter))
    samples = []
    for _ in range(profile.T):
        box = np.array([
            cx + scatter * rng.standard_normal(),
            cy + scatter * rng.standard_normal(),
            0.75 + 0.2 * rng.standard_normal(),
            max(0.1, 1.5 + 0.3 * rng.standard_normal()),
            max(0.1, 1.8 + 0.4 * rng.standard_normal()),
            max(0.1, 4.5 + 0.8 * rng.standard_normal()),
            yaw + 0.3 * rng.standard_normal(),
        ])
        # each pass votes for a uniformly drawn class with moderate confidence
        argmax = int(rng.integers(profile.n_classes))
        conf = float(rng.uniform(0.6, 0.9))
        samples.append(DetectionSample(BoxParams.from_array(box), lam, _scores(argmax, conf, profile.n_classes)))
    return samples


def sense(
    ego: EgoState,
    truth: Sequence[GroundTruthObstacle],
    profile: SensorNoiseProfile,
    seed,
) -> list[DetectionSet]:
    """One perception frame. Deterministic given ``seed`` (int or SeedSequence)."""
    rng = np.random.default_rng(seed)
    out: list[DetectionSet] = []
    for ob in truth:
        dx, dy = ob.x - ego.x, ob.y - ego.y
        d = math.hypot(dx, dy)
        # fixed draw order keeps streams aligned across callers
        u_drop = rng.uniform()
        sub_seed = int(rng.integers(2**32))
        if d > profile.max_range:
            continue
        p_drop = profile.misdetect_rate
        if profile.occlusion_misdetect_rate > 0 and _occluded(ego, ob, truth):
            p_drop = min(1.0, p_drop + profile.occlusion_misdetect_rate)
        if u_drop < p_drop:
            continue
        bearing = wrap_angle(math.atan2(dy, dx) - ego.heading)
        sub = np.random.default_rng(sub_seed)
        out.append(DetectionSet(_true_detection(ob, d, bearing, profile, sub), ob.id, (ob.vx, ob.vy)))
    n_clutter = int(rng.poisson(profile.clutter_rate)) if profile.clutter_rate > 0 else 0
    for _ in range(n_clutter):
        out.append(DetectionSet(_clutter_detection(ego, profile, rng), None))
    return out

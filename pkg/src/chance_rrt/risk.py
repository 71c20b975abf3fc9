"""Analytic collision-risk bound between the uncertain ego footprint and
Gaussian obstacle beliefs, plus a Monte Carlo check.

For each footprint face i with outward normal a_i and offset b_i the obstacle
centre z ~ N(mu, Sigma_obs + Sigma_ego) satisfies the face with probability

    0.5 * (1 - erf((a_i.mu - b_i') / sqrt(2 a_i^T Sigma a_i)))

where b_i' is b_i inflated by the obstacle's deterministic support along a_i.
Collision requires all four faces, so the smallest face probability bounds the
per-obstacle collision probability; obstacles are combined by a union bound.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum
from functools import lru_cache
from typing import Sequence

import numpy as np
from pydantic import ConfigDict

from .dynamics import HalfPlaneSet
from .errors import DomainError
from .geometry import box_support
from .spatial import ObstacleBelief

VAR_EPS = 1e-15

# Abramowitz & Stegun 7.1.26
_P = 0.3275911
_A = (0.254829592, -0.284496736, 1.421413741, -1.453152027, 1.061405429)

LOOKUP_LIMIT = 6.0


class ErfMethod(str, Enum):
    RATIONAL = "rational_approximation"
    LOOKUP = "lookup_table"


@dataclass(frozen=True)
class RiskConfig:
    __pydantic_config__ = ConfigDict(extra="forbid")

    p_safe: float = 0.99
    erf_method: ErfMethod = ErfMethod.RATIONAL
    lookup_step: float = 1e-3

    def __post_init__(self):
        if not 0 < self.p_safe < 1:
            raise DomainError("p_safe must lie in (0, 1)")
        if self.lookup_step <= 0:
            raise DomainError("lookup_step must be positive")
        object.__setattr__(self, "erf_method", ErfMethod(self.erf_method))

    @property
    def delta(self) -> float:
        return 1.0 - self.p_safe


def erf(x):
    """Rational approximation of the error function, |error| <= 1.5e-7."""
    x = np.asarray(x, dtype=float)
    ax = np.abs(x)
    t = 1.0 / (1.0 + _P * ax)
    poly = t * (_A[0] + t * (_A[1] + t * (_A[2] + t * (_A[3] + t * _A[4]))))
    y = np.sign(x) * (1.0 - poly * np.exp(-ax * ax))
    return y if y.ndim else float(y)


@lru_cache(maxsize=8)
def _table(step: float) -> tuple[np.ndarray, np.ndarray]:
    grid = np.arange(0.0, LOOKUP_LIMIT + step / 2, step)
    return grid, np.array([math.erf(g) for g in grid])


def erf_lookup(x, step: float = 1e-3):
    """Error function from a pre-computed table with linear interpolation."""
    grid, values = _table(step)
    x = np.asarray(x, dtype=float)
    y = np.sign(x) * np.interp(np.abs(x), grid, values, right=1.0)
    return y if y.ndim else float(y)


def _erf_for(cfg: RiskConfig | None):
    if cfg is not None and cfg.erf_method is ErfMethod.LOOKUP:
        step = cfg.lookup_step
        return lambda v: erf_lookup(v, step)
    return erf


def _check_cov(cov: np.ndarray) -> np.ndarray:
    cov = np.asarray(cov, dtype=float)
    if cov.shape[-2:] != (2, 2):
        raise DomainError("covariance must be 2x2")
    if not np.allclose(cov, np.swapaxes(cov, -1, -2), atol=1e-12):
        raise DomainError("covariance must be symmetric")
    scale = max(1.0, float(np.abs(cov).max()))
    if np.linalg.eigvalsh(cov).min() < -1e-12 * scale:
        raise DomainError("covariance must be positive semi-definite")
    return cov


def _face_prob(margin: np.ndarray, var: np.ndarray, erf_fn) -> np.ndarray:
    """P(a.z - b < 0) for z with mean margin ``margin`` and variance ``var``."""
    margin = np.asarray(margin, dtype=float)
    var = np.asarray(var, dtype=float)
    degenerate = var <= VAR_EPS
    safe_sd = np.sqrt(2.0 * np.where(degenerate, 1.0, var))
    gauss = 0.5 * (1.0 - erf_fn(margin / safe_sd))
    indicator = np.where(margin < 0, 1.0, np.where(margin > 0, 0.0, 0.5))
    return np.where(degenerate, indicator, gauss)


def constraint_satisfaction_prob(a, b: float, z, cov_total, erf_fn=erf) -> float:
    a = np.asarray(a, dtype=float)
    cov = _check_cov(cov_total)
    margin = float(a @ np.asarray(z, dtype=float)) - b
    var = float(a @ cov @ a)
    return float(_face_prob(margin, var, erf_fn))


def inflated_offsets(polygon: HalfPlaneSet, obstacle: ObstacleBelief) -> np.ndarray:
    """Footprint offsets grown by the obstacle's deterministic box support."""
    support = box_support(polygon.normals, obstacle.heading, obstacle.half_length, obstacle.half_width)
    return polygon.offsets + support


def collision_prob_obstacle(
    polygon: HalfPlaneSet,
    obstacle: ObstacleBelief,
    ego_cov,
    cfg: RiskConfig | None = None,
) -> float:
    erf_fn = _erf_for(cfg)
    cov = _check_cov(np.asarray(obstacle.covariance) + np.asarray(ego_cov, dtype=float))
    offsets = inflated_offsets(polygon, obstacle)
    z = np.asarray(obstacle.center, dtype=float)
    probs = [constraint_satisfaction_prob(a, b, z, cov, erf_fn) for a, b in zip(polygon.normals, offsets)]
    return min(probs)


def total_risk(
    polygon: HalfPlaneSet,
    ego_cov,
    obstacles: Sequence[ObstacleBelief],
    cfg: RiskConfig | None = None,
) -> float:
    total = sum(collision_prob_obstacle(polygon, ob, ego_cov, cfg) for ob in obstacles)
    return min(1.0, float(total))


def check_chance_constraint(delta_t: float, cfg: RiskConfig) -> bool:
    return delta_t < 1.0 - cfg.p_safe


def mc_collision_oracle(
    polygon: HalfPlaneSet,
    obstacle: ObstacleBelief,
    ego_cov,
    n: int = 100_000,
    seed: int = 0,
) -> tuple[float, float]:
    """Sampled probability that the obstacle centre lies inside the inflated footprint.

    Returns ``(estimate, binomial standard error)``. The error is evaluated
    at the estimate clipped to [1/n, 1 - 1/n] so an all-miss or all-hit
    sample still reports about 1/n of uncertainty instead of zero.
    """
    if n < 1000:
        raise DomainError("n must be at least 1000")
    cov = _check_cov(np.asarray(obstacle.covariance) + np.asarray(ego_cov, dtype=float))
    mean = np.asarray(obstacle.center, dtype=float)
    offsets = inflated_offsets(polygon, obstacle)
    rng = np.random.default_rng(seed)
    if np.abs(cov).max() <= VAR_EPS:
        pts = np.broadcast_to(mean, (n, 2))
    else:
        # eigen-factor: tolerates singular covariances
        w, v = np.linalg.eigh(cov)
        factor = v * np.sqrt(np.clip(w, 0.0, None))
        pts = mean + rng.standard_normal((n, 2)) @ factor.T
    inside = np.all(pts @ polygon.normals.T < offsets, axis=1)
    p = float(inside.mean())
    p_se = min(max(p, 1.0 / n), 1.0 - 1.0 / n)
    return p, math.sqrt(p_se * (1.0 - p_se) / n)


@dataclass(frozen=True, eq=False)
class ObstacleField:
    """Obstacle beliefs packed into arrays for batched risk evaluation."""

    centers: np.ndarray  # (K, 2)
    velocities: np.ndarray  # (K, 2)
    headings: np.ndarray  # (K,)
    half_lengths: np.ndarray
    half_widths: np.ndarray
    covariances: np.ndarray  # (K, 2, 2)

    @classmethod
    def from_beliefs(cls, obstacles: Sequence[ObstacleBelief]) -> "ObstacleField":
        k = len(obstacles)
        return cls(
            centers=np.array([o.center for o in obstacles], dtype=float).reshape(k, 2),
            velocities=np.array([o.velocity for o in obstacles], dtype=float).reshape(k, 2),
            headings=np.array([o.heading for o in obstacles], dtype=float),
            half_lengths=np.array([o.half_length for o in obstacles], dtype=float),
            half_widths=np.array([o.half_width for o in obstacles], dtype=float),
            covariances=np.array([o.covariance for o in obstacles], dtype=float).reshape(k, 2, 2),
        )

    def __len__(self) -> int:
        return len(self.headings)


def batch_risk(
    normals: np.ndarray,
    offsets: np.ndarray,
    ego_covs: np.ndarray,
    field: ObstacleField,
    times: np.ndarray,
    cfg: RiskConfig | None = None,
) -> np.ndarray:
    """Union-bound risk at N footprint poses; obstacles advanced to ``times``.

    normals (N, 4, 2), offsets (N, 4), ego_covs (N, 2, 2), times (N,).
    Returns (N,) clamped to [0, 1].
    """
    n = normals.shape[0]
    if len(field) == 0 or n == 0:
        return np.zeros(n)
    erf_fn = _erf_for(cfg)
    # obstacle centres at each time: (N, K, 2)
    z = field.centers[None, :, :] + field.velocities[None, :, :] * np.asarray(times, dtype=float)[:, None, None]
    # (N, K, 4)
    proj = np.einsum("nfi,nki->nkf", normals, z)
    c, s = np.cos(field.headings), np.sin(field.headings)
    along = np.abs(normals[:, None, :, 0] * c[None, :, None] + normals[:, None, :, 1] * s[None, :, None])
    across = np.abs(-normals[:, None, :, 0] * s[None, :, None] + normals[:, None, :, 1] * c[None, :, None])
    support = field.half_lengths[None, :, None] * along + field.half_widths[None, :, None] * across
    margin = proj - offsets[:, None, :] - support
    cov = field.covariances[None, :, :, :] + ego_covs[:, None, :, :]
    var = np.einsum("nfi,nkij,nfj->nkf", normals, cov, normals)
    per_obstacle = _face_prob(margin, var, erf_fn).min(axis=2)
    return np.minimum(per_obstacle.sum(axis=1), 1.0)

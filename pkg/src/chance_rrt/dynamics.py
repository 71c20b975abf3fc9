"""Ego vehicle: kinematic bicycle simulation, pure-pursuit steering, footprint
half-planes and linear covariance propagation.

The simulator is nonlinear; uncertainty is propagated with the linear model
Sigma' = A Sigma A^T + Sigma_gamma on the planar position only.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Union

import numpy as np
from pydantic import ConfigDict

from .errors import DomainError
from .geometry import wrap_angle

Matrix2 = tuple[tuple[float, float], tuple[float, float]]


@dataclass(frozen=True)
class EgoState:
    x: float
    y: float
    heading: float
    speed: float

    @property
    def position(self) -> tuple[float, float]:
        return (self.x, self.y)


@dataclass(frozen=True)
class ControlInput:
    steering: float
    accel: float


@dataclass(frozen=True, eq=False)
class StateBelief:
    mean: EgoState
    covariance: np.ndarray


def _check_psd(name: str, m: np.ndarray) -> None:
    if m.shape != (2, 2) or not np.allclose(m, m.T, atol=1e-12):
        raise DomainError(f"{name} must be a symmetric 2x2 matrix")
    if np.linalg.eigvalsh(m).min() < -1e-12:
        raise DomainError(f"{name} must be positive semi-definite")


@dataclass(frozen=True)
class MotionConfig:
    """Vehicle and controller parameters.

    ``process_noise`` is the per-step position noise covariance; the default
    (0.02 m)^2 * dt per axis is a modelling choice, not a measured value.
    """

    __pydantic_config__ = ConfigDict(extra="forbid")

    wheelbase: float = 2.7
    ego_length: float = 4.5
    ego_width: float = 1.8
    dt: float = 0.1
    process_noise: Matrix2 = ((4e-5, 0.0), (0.0, 4e-5))
    initial_cov: Matrix2 = ((0.01, 0.0), (0.0, 0.01))
    transition: Matrix2 = ((1.0, 0.0), (0.0, 1.0))
    lookahead: float = 6.0
    cruise_speed: float = 7.0
    speed_gain: float = 2.0
    # decelerate to arrive near-stopped at each target; 0 disables
    stop_decel: float = 3.0
    v_max: float = 15.0
    steer_max: float = 0.5
    a_min: float = -6.0
    a_max: float = 3.0
    goal_tolerance: float = 0.5
    max_steps: int = 600

    def __post_init__(self):
        if self.dt <= 0:
            raise DomainError("dt must be positive")
        if self.wheelbase <= 0 or self.ego_length <= 0 or self.ego_width <= 0:
            raise DomainError("vehicle dimensions must be positive")
        if not self.a_min <= 0 <= self.a_max or self.steer_max <= 0 or self.v_max <= 0 or self.stop_decel < 0:
            raise DomainError("control bounds are inconsistent")
        _check_psd("process_noise", self.process_noise_matrix)
        _check_psd("initial_cov", self.initial_cov_matrix)

    @property
    def process_noise_matrix(self) -> np.ndarray:
        return np.array(self.process_noise, dtype=float)

    @property
    def initial_cov_matrix(self) -> np.ndarray:
        return np.array(self.initial_cov, dtype=float)

    @property
    def transition_matrix(self) -> np.ndarray:
        return np.array(self.transition, dtype=float)


@dataclass(frozen=True, eq=False)
class HalfPlaneSet:
    """Footprint {p : normals @ p < offsets}; rows ordered front, rear, left, right."""

    normals: np.ndarray
    offsets: np.ndarray

    def contains(self, p) -> bool:
        return bool(np.all(self.normals @ np.asarray(p, dtype=float) < self.offsets))


@dataclass(frozen=True, eq=False)
class Trajectory:
    """Simulated states after each control; row layout ``[x, y, heading, speed]``."""

    states: np.ndarray
    controls: np.ndarray
    complete: bool

    def __len__(self) -> int:
        return len(self.states)

    def state(self, i: int) -> EgoState:
        return EgoState(*(float(v) for v in self.states[i]))

    def control(self, i: int) -> ControlInput:
        return ControlInput(float(self.controls[i, 0]), float(self.controls[i, 1]))


def _advance(x, y, h, v, steer, accel, cfg: MotionConfig):
    dt = cfg.dt
    nx = x + v * math.cos(h) * dt
    ny = y + v * math.sin(h) * dt
    nh = wrap_angle(h + (v / cfg.wheelbase) * math.tan(steer) * dt)
    nv = min(max(v + accel * dt, 0.0), cfg.v_max)
    return nx, ny, nh, nv


def step(state: EgoState, control: ControlInput, cfg: MotionConfig) -> EgoState:
    """One explicit-Euler step of the kinematic bicycle."""
    return EgoState(*_advance(state.x, state.y, state.heading, state.speed, control.steering, control.accel, cfg))


def _pursuit_steer(x, y, h, lx, ly, cfg: MotionConfig) -> float:
    dx, dy = lx - x, ly - y
    ld = math.hypot(dx, dy)
    if ld < 1e-9:
        return 0.0
    alpha = wrap_angle(math.atan2(dy, dx) - h)
    if abs(alpha) > math.pi / 2:
        return math.copysign(cfg.steer_max, alpha)
    steer = math.atan(2.0 * cfg.wheelbase * math.sin(alpha) / ld)
    return min(max(steer, -cfg.steer_max), cfg.steer_max)


def steer_to(
    start: Union[EgoState, StateBelief],
    target,
    cfg: MotionConfig,
    max_steps: Optional[int] = None,
    tolerance: Optional[float] = None,
) -> Trajectory:
    """Closed-loop pursuit of the straight segment from ``start`` to ``target``.

    Speed tracks ``cruise_speed``, capped by sqrt(2 * stop_decel * remaining
    distance) so every trajectory ends close to standstill. Terminates when within ``tolerance`` of the target (complete), after
    ``max_steps``, or once the vehicle has run past the end of the segment
    (both incomplete).
    """
    s = start.mean if isinstance(start, StateBelief) else start
    tx, ty = float(target[0]), float(target[1])
    if not (math.isfinite(tx) and math.isfinite(ty)):
        raise DomainError("target must be finite")
    max_steps = cfg.max_steps if max_steps is None else max_steps
    tol = cfg.goal_tolerance if tolerance is None else tolerance

    x, y, h, v = s.x, s.y, s.heading, s.speed
    sx, sy = x, y
    seg_len = math.hypot(tx - sx, ty - sy)
    states: list[tuple[float, float, float, float]] = []
    controls: list[tuple[float, float]] = []
    if seg_len <= tol:
        return Trajectory(np.empty((0, 4)), np.empty((0, 2)), True)
    ux, uy = (tx - sx) / seg_len, (ty - sy) / seg_len

    complete = False
    for _ in range(max_steps):
        progress = (x - sx) * ux + (y - sy) * uy
        along = min(max(progress, 0.0) + cfg.lookahead, seg_len)
        steer = _pursuit_steer(x, y, h, sx + along * ux, sy + along * uy, cfg)
        v_ref = cfg.cruise_speed
        if cfg.stop_decel > 0:
            v_ref = min(v_ref, math.sqrt(2.0 * cfg.stop_decel * math.hypot(tx - x, ty - y)))
        accel = min(max(cfg.speed_gain * (v_ref - v), cfg.a_min), cfg.a_max)
        x, y, h, v = _advance(x, y, h, v, steer, accel, cfg)
        states.append((x, y, h, v))
        controls.append((steer, accel))
        if math.hypot(tx - x, ty - y) <= tol:
            complete = True
            break
        if (x - sx) * ux + (y - sy) * uy > seg_len + tol:
            break
    return Trajectory(np.array(states).reshape(-1, 4), np.array(controls).reshape(-1, 2), complete)


def brake_trajectory(start: EgoState, cfg: MotionConfig, min_steps: int = 1) -> Trajectory:
    """Straight-wheel full braking until standstill (at least ``min_steps`` steps)."""
    x, y, h, v = start.x, start.y, start.heading, start.speed
    n = min_steps
    if cfg.a_min < 0:
        n = max(n, math.ceil(v / (-cfg.a_min * cfg.dt) - 1e-9))
    states = np.empty((n, 4))
    for k in range(n):
        x, y, h, v = _advance(x, y, h, v, 0.0, cfg.a_min, cfg)
        states[k] = (x, y, h, v)
    return Trajectory(states, np.tile([0.0, cfg.a_min], (n, 1)), True)


def propagate_covariance(cov, A, process_noise) -> np.ndarray:
    """Sigma' = A Sigma A^T + Sigma_gamma, symmetrised."""
    cov = np.asarray(cov, dtype=float)
    A = np.asarray(A, dtype=float)
    m = A @ cov @ A.T + np.asarray(process_noise, dtype=float)
    return 0.5 * (m + m.T)


def propagate_sequence(cov0, n: int, cfg: MotionConfig) -> np.ndarray:
    """Covariances after 1..n steps, shape (n, 2, 2)."""
    A = cfg.transition_matrix
    Q = cfg.process_noise_matrix
    out = np.empty((n, 2, 2))
    cov = np.asarray(cov0, dtype=float)
    for k in range(n):
        cov = propagate_covariance(cov, A, Q)
        out[k] = cov
    return out


def polygon_arrays(x, y, heading, cfg: MotionConfig) -> tuple[np.ndarray, np.ndarray]:
    """Vectorised footprint half-planes: normals (..., 4, 2), offsets (..., 4)."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    c, s = np.cos(heading), np.sin(heading)
    fwd = np.stack([c, s], axis=-1)
    left = np.stack([-s, c], axis=-1)
    normals = np.stack([fwd, -fwd, left, -left], axis=-2)
    center = np.stack([x, y], axis=-1)
    half = np.array([cfg.ego_length / 2, cfg.ego_length / 2, cfg.ego_width / 2, cfg.ego_width / 2])
    offsets = np.einsum("...ij,...j->...i", normals, center) + half
    return normals, offsets


def ego_polygon(state: EgoState, cfg: MotionConfig) -> HalfPlaneSet:
    normals, offsets = polygon_arrays(state.x, state.y, state.heading, cfg)
    return HalfPlaneSet(normals, offsets)

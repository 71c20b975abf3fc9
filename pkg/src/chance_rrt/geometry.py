"""Small planar geometry helpers shared by dynamics, risk and perception."""

from __future__ import annotations

import math

import numpy as np

TWO_PI = 2.0 * math.pi


def wrap_angle(angle: float) -> float:
    """Map an angle into (-pi, pi]."""
    r = math.remainder(angle, TWO_PI)
    if r <= -math.pi:
        r += TWO_PI
    return r


def wrap_angles(angles: np.ndarray) -> np.ndarray:
    r = np.remainder(np.asarray(angles, dtype=float) + math.pi, TWO_PI) - math.pi
    return np.where(r <= -math.pi, r + TWO_PI, r)


def rotation(theta: float) -> np.ndarray:
    c, s = math.cos(theta), math.sin(theta)
    return np.array([[c, -s], [s, c]])


def box_corners(x: float, y: float, heading: float, half_length: float, half_width: float) -> np.ndarray:
    """Corners of an oriented rectangle, counter-clockwise, shape (4, 2)."""
    c, s = math.cos(heading), math.sin(heading)
    ux, uy = c * half_length, s * half_length
    vx, vy = -s * half_width, c * half_width
    return np.array([
        [x + ux + vx, y + uy + vy],
        [x - ux + vx, y - uy + vy],
        [x - ux - vx, y - uy - vy],
        [x + ux - vx, y + uy - vy],
    ])


def box_support(normal: np.ndarray, heading: float, half_length: float, half_width: float) -> np.ndarray:
    """Support function of a centred oriented box along one or more unit normals.

    ``normal`` may have shape (2,) or (..., 2); the result drops the last axis.
    """
    n = np.asarray(normal, dtype=float)
    c, s = math.cos(heading), math.sin(heading)
    along = np.abs(n[..., 0] * c + n[..., 1] * s)
    across = np.abs(-n[..., 0] * s + n[..., 1] * c)
    return half_length * along + half_width * across


def boxes_overlap(a: np.ndarray, b: np.ndarray) -> bool:
    """Separating-axis test for two convex quadrilaterals given as (4, 2) corners.

    Touching boundaries count as overlap.
    """
    for poly in (a, b):
        edges = np.roll(poly, -1, axis=0) - poly
        normals = np.stack([-edges[:, 1], edges[:, 0]], axis=1)
        for n in normals:
            pa = a @ n
            pb = b @ n
            if pa.max() < pb.min() or pb.max() < pa.min():
                return False
    return True


def segment_hits_box(p0, p1, x: float, y: float, heading: float, half_length: float, half_width: float) -> bool:
    """Slab test: does the closed segment p0-p1 intersect the oriented box?"""
    c, s = math.cos(heading), math.sin(heading)

    def to_body(p):
        dx, dy = p[0] - x, p[1] - y
        return dx * c + dy * s, -dx * s + dy * c

    a = to_body(p0)
    b = to_body(p1)
    t0, t1 = 0.0, 1.0
    for axis, half in ((0, half_length), (1, half_width)):
        d = b[axis] - a[axis]
        if abs(d) < 1e-15:
            if abs(a[axis]) > half:
                return False
            continue
        lo = (-half - a[axis]) / d
        hi = (half - a[axis]) / d
        if lo > hi:
            lo, hi = hi, lo
        t0, t1 = max(t0, lo), min(t1, hi)
        if t0 > t1:
            return False
    return True

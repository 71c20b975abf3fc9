import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from chance_rrt.dynamics import (
    ControlInput,
    EgoState,
    MotionConfig,
    StateBelief,
    brake_trajectory,
    ego_polygon,
    propagate_covariance,
    propagate_sequence,
    step,
    steer_to,
)
from chance_rrt.errors import DomainError
from chance_rrt.geometry import box_corners, rotation, wrap_angle

CFG = MotionConfig()


def test_straight_step_advances_one_metre():
    s = step(EgoState(0, 0, 0, 10), ControlInput(0, 0), MotionConfig(dt=0.1))
    assert s.x == pytest.approx(1.0, abs=1e-15) and s.y == 0.0


def test_zero_speed_stays_put():
    s = step(EgoState(1, 2, 0.3, 0), ControlInput(0.4, 0), CFG)
    assert (s.x, s.y, s.heading) == (1, 2, 0.3)


def test_speed_clamped():
    cfg = MotionConfig(v_max=5)
    assert step(EgoState(0, 0, 0, 4.9), ControlInput(0, 3), cfg).speed == 5
    assert step(EgoState(0, 0, 0, 0.1), ControlInput(0, -6), cfg).speed == 0


def test_constant_steer_closes_circle():
    cfg = MotionConfig(dt=0.001)
    steer, v = 0.3, 5.0
    radius = cfg.wheelbase / math.tan(steer)
    n = int(round(2 * math.pi * radius / (v * cfg.dt)))
    s = EgoState(0, 0, 0, v)
    for _ in range(n):
        s = step(s, ControlInput(steer, 0), cfg)
    assert math.hypot(s.x, s.y) < 0.01 * radius


def test_step_bit_deterministic():
    a = step(EgoState(0.1, 0.2, 0.3, 4), ControlInput(0.2, 1), CFG)
    b = step(EgoState(0.1, 0.2, 0.3, 4), ControlInput(0.2, 1), CFG)
    assert a == b


def test_config_validation():
    with pytest.raises(DomainError):
        MotionConfig(dt=0)
    with pytest.raises(DomainError):
        MotionConfig(process_noise=((1.0, 2.0), (2.0, 1.0)))


def test_steer_collinear_has_no_steering():
    traj = steer_to(EgoState(0, 0, 0, 5), (30, 0), CFG)
    assert traj.complete
    assert np.all(np.abs(traj.controls[:, 0]) < 1e-9)


def test_steer_degenerate_target():
    traj = steer_to(StateBelief(EgoState(3, 4, 0, 2), np.eye(2)), (3, 4), CFG)
    assert traj.complete and len(traj) == 0


def test_steer_reaches_target_on_the_left():
    traj = steer_to(EgoState(0, 0, 0, 5), (0, 20), CFG)
    end = traj.states[-1]
    assert traj.complete
    assert math.hypot(end[0], end[1] - 20) <= CFG.goal_tolerance


def test_steer_unreachable_is_partial():
    traj = steer_to(EgoState(0, 0, 0, 5), (100, 0), CFG, max_steps=10)
    assert not traj.complete and len(traj) == 10


def test_steer_rejects_nonfinite():
    with pytest.raises(DomainError):
        steer_to(EgoState(0, 0, 0, 5), (math.nan, 0), CFG)


@given(st.floats(-40, 40), st.floats(-40, 40), st.floats(-math.pi, math.pi), st.floats(0, 12))
def test_steer_respects_bounds(tx, ty, h, v):
    traj = steer_to(EgoState(0, 0, h, v), (tx, ty), CFG, max_steps=200)
    if len(traj):
        assert np.all(np.abs(traj.controls[:, 0]) <= CFG.steer_max + 1e-12)
        assert np.all((traj.states[:, 3] >= 0) & (traj.states[:, 3] <= CFG.v_max))
        assert np.all((traj.controls[:, 1] >= CFG.a_min) & (traj.controls[:, 1] <= CFG.a_max))
        assert np.all(np.abs(traj.states[:, 2]) <= math.pi)


def test_brake_ends_at_rest():
    traj = brake_trajectory(EgoState(0, 0, 0.2, 7), CFG)
    assert traj.states[-1, 3] == 0.0
    assert len(brake_trajectory(EgoState(0, 0, 0, 0), CFG, min_steps=4)) == 4


def test_covariance_examples():
    cov = np.array([[0.3, 0.1], [0.1, 0.2]])
    assert np.array_equal(propagate_covariance(cov, np.eye(2), np.zeros((2, 2))), cov)
    assert np.allclose(propagate_covariance(np.eye(2), 2 * np.eye(2), np.zeros((2, 2))), 4 * np.eye(2))
    cfg = MotionConfig(process_noise=((0.01, 0), (0, 0.01)))
    seq = propagate_sequence(cov, 25, cfg)
    assert np.allclose(seq[-1], cov + 25 * 0.01 * np.eye(2), atol=1e-14)


def psd(rng):
    m = rng.normal(size=(2, 2))
    return m @ m.T


@given(st.integers(0, 2**31))
def test_covariance_stays_symmetric_psd(seed):
    rng = np.random.default_rng(seed)
    out = propagate_covariance(psd(rng), rng.normal(size=(2, 2)), psd(rng))
    assert np.array_equal(out, out.T)
    assert np.linalg.eigvalsh(out).min() >= -1e-10


def test_polygon_axis_aligned():
    poly = ego_polygon(EgoState(0, 0, 0, 0), MotionConfig(ego_length=4, ego_width=2))
    assert np.allclose(poly.normals, [[1, 0], [-1, 0], [0, 1], [0, -1]])
    assert np.allclose(poly.offsets, [2, 2, 1, 1])


@given(st.floats(-50, 50), st.floats(-50, 50), st.floats(-math.pi, math.pi))
def test_polygon_faces_and_corners(x, y, h):
    poly = ego_polygon(EgoState(x, y, h, 0), CFG)
    assert poly.contains((x, y))
    assert np.allclose(np.linalg.norm(poly.normals, axis=1), 1.0, atol=1e-12)
    assert np.allclose(poly.normals[0], -poly.normals[1]) and np.allclose(poly.normals[2], -poly.normals[3])
    corners = box_corners(x, y, h, CFG.ego_length / 2, CFG.ego_width / 2)
    lhs = corners @ poly.normals.T
    on_face = np.isclose(lhs, poly.offsets, atol=1e-9)
    assert np.all(on_face.sum(axis=1) == 2)
    assert np.all(lhs <= poly.offsets + 1e-9)


@given(st.floats(-20, 20), st.floats(-20, 20), st.floats(-math.pi, math.pi), st.floats(-math.pi, math.pi))
def test_polygon_equivariance(dx, dy, h, rot):
    rng = np.random.default_rng(0)
    pts = rng.uniform(-4, 4, size=(60, 2))
    base = ego_polygon(EgoState(0, 0, h, 0), CFG)
    R = rotation(rot)
    moved = ego_polygon(EgoState(dx, dy, wrap_angle(h + rot), 0), CFG)
    for p in pts:
        q = R @ p + [dx, dy]
        # skip points within round-off of a face
        if np.min(np.abs(base.normals @ p - base.offsets)) < 1e-7:
            continue
        assert base.contains(p) == moved.contains(q)

import math
from dataclasses import replace

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from chance_rrt.errors import DomainError
from chance_rrt.spatial import (
    DEFAULT_MI_MAX,
    DEFAULT_PE_MAX,
    filter_misdetections,
    lateral_longitudinal_sigma,
    make_obstacle_belief,
    orientation_margins,
)
from chance_rrt.uncertainty import BoxParams, DetectionBelief


def belief(var=None, theta=0.0, w=1.8, l=4.5, pe=0.0, mi=0.0):  # noqa: E741
    var = np.zeros(7) if var is None else np.asarray(var, dtype=float)
    return DetectionBelief(BoxParams(3.0, -1.0, 0.7, 1.5, w, l, theta), np.zeros(7), var, var, pe, mi, 6)


def test_sigma_examples():
    assert lateral_longitudinal_sigma(9, 0, 16, 0) == (5.0, 0.0)
    assert lateral_longitudinal_sigma(0, 0, 0, 0) == (0.0, 0.0)
    assert lateral_longitudinal_sigma(2.0, 3.0, 0, 0)[0] == lateral_longitudinal_sigma(0, 3.0, 2.0, 0)[0]


def test_sigma_negative_rejected():
    with pytest.raises(DomainError):
        lateral_longitudinal_sigma(-1e-3, 0, 0, 0)


def test_margin_examples():
    assert orientation_margins(1.8, 4.5, 0.0) == (0.0, 0.0)
    for s in (0.1, 0.7, 1.5):
        assert orientation_margins(3.0, 3.0, s)[0] == pytest.approx(0.0, abs=1e-12)
    da, db = orientation_margins(2.0, 4.0, math.pi / 4)
    # hand evaluation: 2 * (1 - 2 * sqrt(2 / 20))
    assert da == pytest.approx(2 * (1 - 2 * math.sqrt(0.1)), abs=1e-12)
    assert da == pytest.approx(0.7351, abs=1e-4)
    assert db == pytest.approx(0.3675, abs=1e-4)


def test_margin_singularity_rejected():
    with pytest.raises(DomainError):
        orientation_margins(2.0, 4.0, math.pi / 2)


def test_margin_clamped_for_wide_boxes():
    assert orientation_margins(4.0, 2.0, 0.5) == (0.0, 0.0)


def test_deterministic_belief():
    ob = make_obstacle_belief(belief())
    assert ob.semi_axis_lon == 2.25 and ob.semi_axis_lat == 0.9
    assert np.all(ob.covariance == 0)
    assert not ob.suspect


def test_heading_zero_covariance_diagonal():
    var = np.array([0.04, 0.09, 0, 0, 0.01, 0.16, 0.0])
    ob = make_obstacle_belief(belief(var))
    assert ob.covariance[0, 1] == 0.0
    assert ob.covariance[0, 0] == pytest.approx((ob.sigma_lon + ob.delta_a) ** 2)
    assert ob.covariance[1, 1] == pytest.approx((ob.sigma_lat + ob.delta_b) ** 2)


@given(st.floats(-math.pi, math.pi), st.lists(st.floats(0, 0.5), min_size=7, max_size=7))
def test_rotation_preserves_spectrum_and_axes(theta, var):
    var = np.array(var)
    var[6] = min(var[6], 0.5)
    a = make_obstacle_belief(belief(var, 0.0))
    b = make_obstacle_belief(belief(var, theta))
    assert (a.semi_axis_lon, a.semi_axis_lat) == pytest.approx((b.semi_axis_lon, b.semi_axis_lat))
    assert np.allclose(np.sort(np.linalg.eigvalsh(b.covariance)), np.sort(np.diag(a.covariance)), atol=1e-12)
    assert np.allclose(b.covariance, b.covariance.T, atol=1e-12)
    if b.covariance[0, 0] - b.covariance[1, 1] > 1e-6 or abs(b.covariance[0, 1]) > 1e-6:
        # the longitudinal (larger) eigenvector follows the heading
        w, v = np.linalg.eigh(b.covariance)
        lon = v[:, np.argmax(w)]
        if (b.sigma_lon + b.delta_a) > (b.sigma_lat + b.delta_b) + 1e-6:
            assert abs(abs(lon @ [math.cos(theta), math.sin(theta)]) - 1) < 1e-6


@given(st.lists(st.floats(0, 1), min_size=7, max_size=7), st.integers(0, 6), st.floats(1e-3, 0.5))
def test_axes_monotone_in_each_variance(var, idx, bump):
    var = np.array(var)
    var[6] = min(var[6], 0.8)
    more = var.copy()
    more[idx] += bump if idx != 6 else min(bump, 0.2)
    a, b = make_obstacle_belief(belief(var)), make_obstacle_belief(belief(more))
    assert b.semi_axis_lon >= a.semi_axis_lon - 1e-12
    assert b.semi_axis_lat >= a.semi_axis_lat - 1e-12


@given(st.floats(0.5, 3), st.floats(0.5, 6), st.floats(0, 1.5))
def test_delta_ratio(w, l, s):  # noqa: E741
    da, db = orientation_margins(w, l, s)
    assert da >= 0 and db >= 0
    assert db * (l / 2) == pytest.approx(da * (w / 2), abs=1e-9)


def test_filter_examples():
    ok = make_obstacle_belief(belief())
    high_mi = make_obstacle_belief(belief(mi=DEFAULT_MI_MAX + 1e-6))
    edge = make_obstacle_belief(belief(pe=DEFAULT_PE_MAX))
    kept, rejected = filter_misdetections([ok, high_mi, edge])
    assert kept == [ok, edge]
    assert len(rejected) == 1 and rejected[0].suspect
    assert not high_mi.suspect


def test_filter_partition_and_idempotence():
    rng = np.random.default_rng(3)
    obs = [make_obstacle_belief(belief(pe=rng.uniform(0, 0.7), mi=rng.uniform(0, 0.4))) for _ in range(40)]
    kept, rejected = filter_misdetections(obs)
    assert len(kept) + len(rejected) == len(obs)
    assert {id(o) for o in kept}.isdisjoint({id(o) for o in rejected})
    again, none = filter_misdetections(kept)
    assert again == kept and none == []


def test_filter_negative_threshold():
    with pytest.raises(DomainError):
        filter_misdetections([], -0.1, 0.1)


def test_replace_keeps_source():
    ob = make_obstacle_belief(belief(), source_id="car")
    assert replace(ob, suspect=True).source_id == "car"

import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.spatial.transform import Rotation

from multipick.spatial import (Pose, Wrench, quat_from_axis_angle, quat_multiply, quat_slerp,
                               quat_to_matrix, quat_to_rotvec)

unit = st.lists(st.floats(-1, 1), min_size=4, max_size=4).filter(lambda v: np.linalg.norm(v) > 0.1)


@given(unit)
def test_pose_orientation_is_unit(q):
    assert abs(np.linalg.norm(Pose([0, 0, 0], q).orientation) - 1.0) <= 1e-12


def test_pose_rejects_non_finite():
    with pytest.raises(ValueError):
        Pose([0, math.nan, 0])
    with pytest.raises(ValueError):
        Pose([0, 0, 0], [0, 0, 0, 0])
    with pytest.raises(ValueError):
        Wrench([math.inf, 0, 0])


def test_pose_is_immutable():
    p = Pose([1, 2, 3])
    with pytest.raises(ValueError):
        p.position[0] = 5.0


@given(unit, unit)
def test_quaternion_helpers_match_scipy(a, b):
    qa, qb = Pose([0, 0, 0], a).orientation, Pose([0, 0, 0], b).orientation
    ra, rb = Rotation.from_quat(qa), Rotation.from_quat(qb)
    assert np.allclose(quat_to_matrix(qa), ra.as_matrix(), atol=1e-12)
    prod = Rotation.from_quat(quat_multiply(qa, qb))
    assert (prod.inv() * (ra * rb)).magnitude() < 1e-9
    assert np.allclose(Rotation.from_rotvec(quat_to_rotvec(qa)).as_matrix(), ra.as_matrix(), atol=1e-9)


def test_slerp_quarter_turn():
    q0 = np.array([0, 0, 0, 1.0])
    q1 = quat_from_axis_angle([0, 0, 1], math.pi / 2)
    mid = quat_slerp(q0, q1, 0.5)
    assert np.allclose(mid, quat_from_axis_angle([0, 0, 1], math.pi / 4), atol=1e-12)


def test_slerp_takes_short_arc():
    q0 = np.array([0, 0, 0, 1.0])
    q1 = -quat_from_axis_angle([1, 0, 0], 0.2)  # same rotation, other hemisphere
    mid = Rotation.from_quat(quat_slerp(q0, q1, 0.5))
    assert abs(mid.magnitude() - 0.1) < 1e-12


def test_transform_round_trip():
    p = Pose([0.1, -0.2, 0.3], quat_from_axis_angle([1, 1, 0], 0.7))
    pts = np.random.default_rng(0).normal(size=(20, 3))
    assert np.allclose(p.inverse_transform(p.transform(pts)), pts, atol=1e-12)


def test_dict_round_trip_and_wrench_add():
    p = Pose([0.1, 0.2, 0.3], quat_from_axis_angle([0, 1, 0], 1.1))
    assert Pose.from_dict(p.to_dict()) == p
    w = Wrench([1, 2, 3], [4, 5, 6])
    assert Wrench.from_array(w.as_array()) == w
    assert (w + Wrench.zero()) == w


@settings(max_examples=50)
@given(st.floats(-3, 3), st.floats(-3, 3), st.floats(-3, 3))
def test_translated(dx, dy, dz):
    p = Pose([0, 0, 0]).translated([dx, dy, dz])
    assert np.array_equal(p.position, np.array([dx, dy, dz]))

from dataclasses import replace

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.spatial.transform import Rotation

from multipick import arm
from multipick.errors import OutOfRange
from multipick.spatial import Pose, quat_from_axis_angle

K = arm.ImpedanceParams()
vec = st.lists(st.floats(-0.5, 0.5), min_size=3, max_size=3).map(np.array)


def _pose(seed):
    rng = np.random.default_rng(seed)
    return Pose(rng.uniform(-1, 1, 3), Rotation.random(random_state=rng).as_quat())


def test_fixture_wrenches():
    a = Pose([0, 0, 0])
    assert arm.impedance_wrench(K, a, a) == arm.impedance_wrench(K, a, a).zero()
    f = arm.impedance_wrench(K, Pose([0.001, 0, 0]), a)
    assert np.allclose(f.force, [2.0, 0, 0]) and np.allclose(f.torque, 0)
    t = arm.impedance_wrench(K, Pose([0, 0, 0], quat_from_axis_angle([0, 0, 1], 0.1)), a)
    assert np.allclose(t.torque, [0, 0, 20.0]) and np.allclose(t.force, 0)


@given(vec, vec, st.floats(-3, 3))
def test_wrench_linear_and_odd(e1, e2, s):
    a = Pose([0, 0, 0])
    f = lambda e: arm.impedance_wrench(K, Pose(e), a).force
    assert np.allclose(f(e1 + s * e2), f(e1) + s * f(e2), atol=1e-9)
    assert np.array_equal(f(-e1), -f(e1))


@settings(max_examples=50)
@given(st.integers(0, 10_000), st.integers(0, 10_000), st.floats(0.1, 20), st.floats(0, 1))
def test_interpolation_time_reversal(s0, s1, duration, u):
    a, b = _pose(s0), _pose(s1)
    t = u * duration
    fwd = arm.interpolate_pose(a, b, duration, t)
    rev = arm.interpolate_pose(b, a, duration, duration - t)
    assert np.allclose(fwd.position, rev.position, atol=1e-12)
    dq = Rotation.from_quat(fwd.orientation).inv() * Rotation.from_quat(rev.orientation)
    assert dq.magnitude() < 1e-9


def test_interpolation_range():
    a, b = _pose(1), _pose(2)
    assert arm.interpolate_pose(a, b, 2.0, 0.0) is a
    assert arm.interpolate_pose(a, b, 2.0, 2.0) is b
    for bad in (-0.1, 2.1):
        with pytest.raises(OutOfRange):
            arm.interpolate_pose(a, b, 2.0, bad)
    with pytest.raises(OutOfRange):
        arm.interpolate_pose(a, b, 0.0, 0.0)


def test_step_tracks_when_free_and_time_advances():
    s = arm.ArmState.at(Pose([0, 0, 0]))
    target = Pose([0.1, 0, 0])
    s1 = arm.step(replace(s, desired_pose=target), K)
    assert s1.actual_pose == target and s1.time == pytest.approx(0.01)
    assert np.allclose(s1.external_wrench.force, 0)


def test_blocked_then_released():
    wall = arm.Obstruction([0, 0, -0.01], [0, 0, 1])
    s = arm.ArmState.at(Pose([0, 0, 0]))
    s = arm.step(replace(s, desired_pose=Pose([0, 0, -0.02])), K, wall)
    assert s.actual_pose.position[2] == pytest.approx(-0.01)
    assert s.external_wrench.force[2] == pytest.approx(-20.0)
    s = arm.step(s, K, None)
    assert np.allclose(s.external_wrench.force, 0)


def test_step_is_deterministic():
    wall = arm.Obstruction([0, 0, -0.01], [0, 0, 1])
    s = replace(arm.ArmState.at(Pose([0, 0, 0])), desired_pose=Pose([0.01, 0, -0.05]))
    assert arm.step(s, K, wall) == arm.step(s, K, wall)


def test_straight_descent_matches_stepping():
    wall = arm.Obstruction([0, 0, -0.012], [0, 0, 1])
    start = arm.ArmState.at(Pose([0, 0, 0]))
    times, desired, actual, force = arm.straight_descent(start, [0, 0, -1], 0.05, 40, K, wall, 0.01)
    s = start
    for k in range(40):
        target = Pose(start.actual_pose.position + np.array([0, 0, -0.05 * 0.01 * (k + 1)]))
        s = arm.step(replace(s, desired_pose=target), K, wall, 0.01)
        assert np.allclose(s.actual_pose.position, actual[k], atol=1e-15)
        assert np.allclose(s.external_wrench.force, force[k], atol=1e-12)
    assert times[-1] == pytest.approx(s.time)


def test_follow_ends_exactly():
    a, b = _pose(3), _pose(4)
    states = list(arm.follow(arm.ArmState.at(a), a, b, 0.105, K, 0.01))
    assert len(states) == 11 and states[-1].actual_pose == b
    assert all(t1.time > t0.time for t0, t1 in zip(states, states[1:]))


def test_params_validated():
    with pytest.raises(ValueError):
        arm.ImpedanceParams(stiffness_translational=0)
    with pytest.raises(ValueError):
        arm.ImpedanceParams(damping_ratio=-1)

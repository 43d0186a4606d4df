"""Task-space impedance-controlled arm with a quasi-static plant.

The actual pose tracks the desired pose exactly unless a half-space obstruction
blocks it; the external wrench is then the spring force of the tracking error.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Optional

import numpy as np

from .errors import OutOfRange
from .spatial import Pose, Wrench, quat_conjugate, quat_multiply, quat_slerp, quat_to_rotvec


@dataclass(frozen=True)
class ImpedanceParams:
    stiffness_translational: float = 2000.0  # N/m
    stiffness_rotational: float = 200.0  # N*m/rad
    damping_ratio: float = 1.0
    virtual_mass: float = 2.0  # kg; unused by the quasi-static plant

    def __post_init__(self):
        if self.stiffness_translational <= 0 or self.stiffness_rotational <= 0:
            raise ValueError("stiffness values must be positive")
        if self.damping_ratio < 0:
            raise ValueError("damping_ratio must be non-negative")
        if self.virtual_mass <= 0:
            raise ValueError("virtual_mass must be positive")


@dataclass(frozen=True)
class Obstruction:
    """Half-space ``(p - point) . normal >= 0`` the tool centre cannot leave."""

    point: np.ndarray
    normal: np.ndarray

    def __post_init__(self):
        n = np.asarray(self.normal, dtype=float)
        object.__setattr__(self, "point", np.asarray(self.point, dtype=float))
        object.__setattr__(self, "normal", n / np.linalg.norm(n))

    def clamp(self, position: np.ndarray) -> np.ndarray:
        depth = float((position - self.point) @ self.normal)
        if depth >= 0.0:
            return position
        return position - depth * self.normal


@dataclass(frozen=True)
class ArmState:
    actual_pose: Pose
    desired_pose: Pose
    time: float = 0.0
    external_wrench: Wrench = field(default_factory=Wrench.zero)

    @classmethod
    def at(cls, pose: Pose, time: float = 0.0) -> "ArmState":
        return cls(pose, pose, time, Wrench.zero())


def interpolate_pose(start: Pose, end: Pose, duration: float, t: float) -> Pose:
    """Linear position, shortest-arc slerp orientation; exact at both endpoints."""
    if not duration > 0:
        raise OutOfRange(f"duration must be positive, got {duration}")
    if not (0.0 <= t <= duration):
        raise OutOfRange(f"t={t} outside [0, {duration}]")
    if t == 0.0:
        return start
    if t == duration:
        return end
    u = t / duration
    position = start.position + u * (end.position - start.position)
    return Pose(position, quat_slerp(start.orientation, end.orientation, u))


def orientation_error(desired: Pose, actual: Pose) -> np.ndarray:
    """Rotation vector taking ``actual`` to ``desired``, world frame."""
    rel = quat_multiply(desired.orientation, quat_conjugate(actual.orientation))
    return quat_to_rotvec(rel)


def impedance_wrench(params: ImpedanceParams, desired: Pose, actual: Pose) -> Wrench:
    force = params.stiffness_translational * (desired.position - actual.position)
    torque = params.stiffness_rotational * orientation_error(desired, actual)
    return Wrench(force, torque)


def step(state: ArmState, params: ImpedanceParams, obstruction: Optional[Obstruction] = None,
         dt: float = 0.01) -> ArmState:
    """Advance the plant one tick towards ``state.desired_pose``.

    Callers move the setpoint with ``dataclasses.replace(state, desired_pose=...)``
    before stepping.
    """
    if not dt > 0:
        raise OutOfRange(f"dt must be positive, got {dt}")
    desired = state.desired_pose
    if obstruction is None:
        actual = desired
    else:
        clamped = obstruction.clamp(desired.position)
        actual = desired if clamped is desired.position else Pose(clamped, desired.orientation)
    return replace(
        state,
        actual_pose=actual,
        time=state.time + dt,
        external_wrench=impedance_wrench(params, desired, actual),
    )


def follow(state: ArmState, start: Pose, end: Pose, duration: float, params: ImpedanceParams,
           dt: float, obstruction: Optional[Obstruction] = None):
    """Yield the stepped states along an interpolated segment, one per tick.

    The last tick is shortened so the segment ends exactly at ``duration``.
    """
    n = max(1, int(np.ceil(duration / dt - 1e-9)))
    prev = 0.0
    for k in range(1, n + 1):
        t = duration if k == n else k * dt
        target = interpolate_pose(start, end, duration, t)
        state = step(replace(state, desired_pose=target), params, obstruction, t - prev)
        prev = t
        yield state


def straight_descent(state: ArmState, direction, speed: float, n_ticks: int, params: ImpedanceParams,
                     obstruction: Optional[Obstruction] = None, dt: float = 0.01):
    """Closed form of ``n_ticks`` calls to :func:`step` along a constant-speed line.

    The setpoint starts at ``state.actual_pose`` and advances ``speed * dt`` per
    tick along ``direction`` with fixed orientation. Returns tick times, desired
    and actual positions ``(n, 3)`` and the external force ``(n, 3)``; the
    torque is zero since orientation is held.
    """
    if not dt > 0 or not speed > 0:
        raise OutOfRange("dt and speed must be positive")
    d = np.asarray(direction, dtype=float)
    d = d / np.linalg.norm(d)
    k = np.arange(1, n_ticks + 1)
    desired = state.actual_pose.position[None, :] + (k * dt * speed)[:, None] * d[None, :]
    actual = desired
    if obstruction is not None:
        depth = (desired - obstruction.point[None, :]) @ obstruction.normal
        actual = desired - np.minimum(depth, 0.0)[:, None] * obstruction.normal[None, :]
    force = params.stiffness_translational * (desired - actual)
    return state.time + k * dt, desired, actual, force

"""Wrist force/torque sensor model and threshold-based contact detection."""

from __future__ import annotations

import csv
import enum
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from .errors import EmptyHistory
from .spatial import Wrench


@dataclass(frozen=True)
class DetectionThresholds:
    force_abs: float = 5.0  # N
    torque_abs: float = 1.0  # N*m
    force_rate: float = 3.0  # N/s
    torque_rate: float = 0.3  # N*m/s

    def __post_init__(self):
        for name in ("force_abs", "torque_abs", "force_rate", "torque_rate"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")

    def scaled(self, factor: float) -> "DetectionThresholds":
        return DetectionThresholds(*(factor * v for v in (self.force_abs, self.torque_abs,
                                                          self.force_rate, self.torque_rate)))


@dataclass(frozen=True)
class SensorModel:
    noise_std_force: float = 0.005  # N
    noise_std_torque: float = 0.0005  # N*m
    bias: Wrench = field(default_factory=Wrench.zero)
    seed: int = 0

    def __post_init__(self):
        if self.noise_std_force < 0 or self.noise_std_torque < 0:
            raise ValueError("noise standard deviations must be non-negative")


def _unit_normals(seed: int, first_tick: int, n: int) -> np.ndarray:
    """Standard normals of shape ``(n, 6)``; row ``k`` depends only on
    ``(seed, first_tick + k)``.

    A counter-based Philox stream keyed on the seed, two counter steps (eight
    raw words) per tick, mapped through Box-Muller. Drawing a block or a
    single tick gives identical rows.
    """
    key = seed & 0xFFFFFFFFFFFFFFFF
    raw = np.random.Philox(key=key, counter=[2 * first_tick, 0, 0, 0]).random_raw(8 * n)
    u = ((raw.reshape(n, 8)[:, :6] >> np.uint64(11)).astype(float) + 0.5) * 2.0 ** -53
    r = np.sqrt(-2.0 * np.log(u[:, 0::2]))
    theta = 2.0 * np.pi * u[:, 1::2]
    return np.concatenate([r * np.cos(theta), r * np.sin(theta)], axis=1)


def sensed_wrenches(true_wrenches, model: SensorModel, first_tick: int = 0) -> np.ndarray:
    """Vectorised :func:`sensed_wrench` over rows ``(fx, fy, fz, tx, ty, tz)``
    for consecutive ticks starting at ``first_tick``."""
    true = np.atleast_2d(np.asarray(true_wrenches, dtype=float))
    out = true + model.bias.as_array()[None, :]
    if model.noise_std_force == 0 and model.noise_std_torque == 0:
        return out
    z = _unit_normals(model.seed, first_tick, len(out))
    scale = np.array([model.noise_std_force] * 3 + [model.noise_std_torque] * 3)
    return out + z * scale[None, :]


def sensed_wrench(true_wrench: Wrench, model: SensorModel, tick: int) -> Wrench:
    """True wrench plus bias plus Gaussian noise keyed on ``(seed, tick)``, so
    any tick can be replayed in isolation."""
    if model.noise_std_force == 0 and model.noise_std_torque == 0:
        return true_wrench + model.bias
    return Wrench.from_array(sensed_wrenches(true_wrench.as_array(), model, tick)[0])


class Trigger(str, enum.Enum):
    # declaration order is the tie-break order
    FORCE_ABS = "ForceAbs"
    TORQUE_ABS = "TorqueAbs"
    FORCE_RATE = "ForceRate"
    TORQUE_RATE = "TorqueRate"


@dataclass(frozen=True)
class Detection:
    trigger: Trigger
    time: float
    index: int


def _as_matrix(history) -> tuple[np.ndarray, np.ndarray]:
    times = np.empty(len(history))
    values = np.empty((len(history), 6))
    for k, (t, w) in enumerate(history):
        times[k] = t
        values[k] = w.as_array() if isinstance(w, Wrench) else np.asarray(w, dtype=float)
    return times, values


def detect_contact(history: Sequence, thresholds: DetectionThresholds, dt: float) -> Optional[Detection]:
    """Earliest sample crossing any magnitude or rate threshold.

    ``history`` holds ``(time, Wrench)`` pairs at uniform spacing ``dt``. Rates
    are one-tick backward differences of the force and torque norms in units per
    second, so the first sample can only trip the absolute thresholds.
    """
    if len(history) == 0:
        raise EmptyHistory("detect_contact needs at least one sample")
    times, values = _as_matrix(history)
    return detect_in_arrays(times, values, thresholds, dt)


def detect_in_arrays(times: np.ndarray, values: np.ndarray, thresholds: DetectionThresholds,
                     dt: float) -> Optional[Detection]:
    """:func:`detect_contact` on a time vector and an ``(n, 6)`` wrench array."""
    if len(times) == 0:
        raise EmptyHistory("detect_contact needs at least one sample")
    fmag = np.linalg.norm(values[:, :3], axis=1)
    tmag = np.linalg.norm(values[:, 3:], axis=1)
    frate = np.concatenate([[-np.inf], np.diff(fmag) / dt])
    trate = np.concatenate([[-np.inf], np.diff(tmag) / dt])
    hits = np.stack([
        fmag >= thresholds.force_abs,
        tmag >= thresholds.torque_abs,
        frate >= thresholds.force_rate,
        trate >= thresholds.torque_rate,
    ], axis=1)
    rows = np.nonzero(hits.any(axis=1))[0]
    if len(rows) == 0:
        return None
    k = int(rows[0])
    trigger = list(Trigger)[int(np.argmax(hits[k]))]
    return Detection(trigger, float(times[k]), k)


class ContactMonitor:
    """Incremental form of :func:`detect_contact` for use inside a control loop.

    Feeding the same samples gives the same answer as the batch function.
    """

    def __init__(self, thresholds: DetectionThresholds, dt: float):
        self.thresholds = thresholds
        self.dt = dt
        self._prev: Optional[tuple[float, float]] = None
        self._count = 0

    def update(self, time: float, wrench: Wrench) -> Optional[Detection]:
        th = self.thresholds
        f = float(np.linalg.norm(wrench.force))
        t = float(np.linalg.norm(wrench.torque))
        hits = [f >= th.force_abs, t >= th.torque_abs, False, False]
        if self._prev is not None:
            hits[2] = (f - self._prev[0]) / self.dt >= th.force_rate
            hits[3] = (t - self._prev[1]) / self.dt >= th.torque_rate
        self._prev = (f, t)
        k = self._count
        self._count += 1
        for trig, hit in zip(Trigger, hits):
            if hit:
                return Detection(trig, time, k)
        return None


TRACE_COLUMNS = ("time_s", "fx", "fy", "fz", "tx", "ty", "tz")


def write_trace_csv(path, history: Sequence) -> None:
    times, values = _as_matrix(history)
    with open(Path(path), "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(TRACE_COLUMNS)
        for t, row in zip(times, values):
            w.writerow([f"{t:.9g}"] + [f"{v:.9g}" for v in row])


def read_trace_csv(path) -> list[tuple[float, Wrench]]:
    with open(Path(path), newline="") as fh:
        reader = csv.DictReader(fh)
        return [
            (float(r["time_s"]), Wrench([float(r["fx"]), float(r["fy"]), float(r["fz"])],
                                        [float(r["tx"]), float(r["ty"]), float(r["tz"])]))
            for r in reader
        ]

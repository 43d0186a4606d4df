"""Kinematics and contact-mode model of the four-finger belt gripper.

Each finger is a planar four-bar: a motor-driven crank, a belt acting as the
coupler, and the proximal phalanx as the rocker, with the fingertip extending
beyond the rocker's distal joint. A single gear-coupled degree of freedom
(``spread``) sweeps the four fingers between a parallel and a concentric layout.

Finger-plane coordinates: ``x`` runs along the straight finger away from the
palm, ``y`` points towards the grasp axis (the flexion side). The rocker pivot
sits at the origin.

Gripper frame: origin at the palm centre, ``z`` along the tool axis pointing
away from the palm towards the objects.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field, replace
from functools import lru_cache
from typing import TYPE_CHECKING, Optional, Sequence

import numpy as np

from .errors import NoClosure, OutOfRange, StepLimit
from .geometry import inflated_ellipsoid_level
from .spatial import Pose

if TYPE_CHECKING:
    from .scene import Scene

N_FINGERS = 4
ARC_SAMPLES = 21


class ContactMode(str, enum.Enum):
    RIGID = "Rigid"
    COMPLIANT = "Compliant"


@dataclass(frozen=True)
class FingerLinkage:
    """Link lengths in metres.

    ``ground_angle_deg`` is the direction of the crank pivot seen from the
    rocker pivot in the finger plane; the default places the motor behind and
    outboard of the phalanx so the rocker swings roughly 0-75 deg.
    """

    crank_length: float = 0.012
    coupler_length: float = 0.045
    rocker_length: float = 0.040
    ground_length: float = 0.020
    tip_offset: float = 0.010
    finger_width: float = 0.014
    ground_angle_deg: float = -60.0

    def __post_init__(self):
        for name in ("crank_length", "coupler_length", "rocker_length", "ground_length",
                     "tip_offset", "finger_width"):
            v = getattr(self, name)
            if not (v > 0 and math.isfinite(v)):
                raise ValueError(f"{name} must be positive, got {v}")

    @property
    def finger_length(self) -> float:
        return self.rocker_length + self.tip_offset

    @property
    def ground_angle(self) -> float:
        return math.radians(self.ground_angle_deg)

    @property
    def crank_pivot(self) -> np.ndarray:
        return self.ground_length * np.array([math.cos(self.ground_angle), math.sin(self.ground_angle)])

    @property
    def belt_fraction(self) -> float:
        """Arc position of the rocker's distal joint along the finger."""
        return self.rocker_length / self.finger_length


@dataclass(frozen=True)
class FingerPose:
    """Joint positions of one finger in its plane (metres)."""

    crank_pivot: np.ndarray
    crank_end: np.ndarray
    rocker_end: np.ndarray
    tip: np.ndarray
    rocker_angle: float

    @property
    def rocker_pivot(self) -> np.ndarray:
        return np.zeros(2)

    @property
    def belt(self) -> tuple[np.ndarray, np.ndarray]:
        return self.crank_end, self.rocker_end


def _rocker_end(linkage: FingerLinkage, crank_angle: float, branch: float) -> tuple[np.ndarray, np.ndarray]:
    a, b, c = linkage.crank_length, linkage.coupler_length, linkage.rocker_length
    crank_end = linkage.crank_pivot + a * np.array([math.cos(crank_angle), math.sin(crank_angle)])
    dist = math.hypot(crank_end[0], crank_end[1])
    if dist == 0.0:
        raise NoClosure("crank end coincides with the rocker pivot")
    along = (dist * dist + c * c - b * b) / (2.0 * dist)
    disc = c * c - along * along
    if disc < 0.0:
        raise NoClosure(
            f"linkage cannot assemble at crank angle {math.degrees(crank_angle):.3f} deg "
            f"(discriminant {disc:.3e})"
        )
    e = crank_end / dist
    n = np.array([-e[1], e[0]])
    return crank_end, along * e + branch * math.sqrt(disc) * n


@lru_cache(maxsize=256)
def _straight_assembly(linkage: FingerLinkage) -> tuple[float, float]:
    """Crank angle and assembly branch that put the rocker straight along +x with
    the rocker flexing towards +y as the crank angle grows."""
    a, b, c = linkage.crank_length, linkage.coupler_length, linkage.rocker_length
    pivot = linkage.crank_pivot
    straight = np.array([c, 0.0])
    # crank end lies on circle(pivot, a) and circle(straight, b)
    delta = straight - pivot
    dist = float(np.linalg.norm(delta))
    along = (dist * dist + a * a - b * b) / (2.0 * dist)
    disc = a * a - along * along
    if disc < 0.0:
        raise NoClosure("linkage cannot reach the straight-finger configuration")
    e = delta / dist
    n = np.array([-e[1], e[0]])
    for branch in (1.0, -1.0):
        for side in (1.0, -1.0):
            end = pivot + along * e + side * math.sqrt(disc) * n
            phi0 = math.atan2(end[1] - pivot[1], end[0] - pivot[0])
            try:
                _, tip0 = _rocker_end(linkage, phi0, branch)
                _, tip1 = _rocker_end(linkage, phi0 + 1e-6, branch)
            except NoClosure:
                continue
            if np.linalg.norm(tip0 - straight) < 1e-9 * max(1.0, c) and tip1[1] > tip0[1]:
                return phi0, branch
    raise NoClosure("no assembly branch flexes inward from the straight configuration")


def finger_fk(linkage: FingerLinkage, flexion: float, wrap: float = 0.0) -> FingerPose:
    """Closed-form circle-intersection solution of the finger four-bar.

    ``flexion`` is the crank rotation from the straight finger (rad). ``wrap`` is
    the extra inward rotation of the distal segment when the belt is loaded
    (zero in rigid mode).
    """
    phi0, branch = _straight_assembly(linkage)
    crank_end, rocker_end = _rocker_end(linkage, phi0 + flexion, branch)
    psi = math.atan2(rocker_end[1], rocker_end[0])
    tip_dir = np.array([math.cos(psi + wrap), math.sin(psi + wrap)])
    tip = rocker_end + linkage.tip_offset * tip_dir
    return FingerPose(linkage.crank_pivot, crank_end, rocker_end, tip, psi)


def arc_points(linkage: FingerLinkage, pose: FingerPose, arc: np.ndarray) -> np.ndarray:
    """Finger-plane points at arc positions in [0, 1] from base to tip."""
    arc = np.asarray(arc, dtype=float)
    s = arc * linkage.finger_length
    r = linkage.rocker_length
    rocker_dir = pose.rocker_end / r
    tip_dir = (pose.tip - pose.rocker_end) / linkage.tip_offset
    on_rocker = s <= r
    out = np.where(
        on_rocker[:, None],
        s[:, None] * rocker_dir[None, :],
        pose.rocker_end[None, :] + (s - r)[:, None] * tip_dir[None, :],
    )
    return out


@dataclass(frozen=True)
class GripperConfig:
    linkage: FingerLinkage = field(default_factory=FingerLinkage)
    palm_radius: float = 0.035
    pair_gap: float = 0.030
    grasp_axis_deg: float = 45.0
    concentric_azimuths_deg: tuple = (0.0, 90.0, 180.0, 270.0)
    flexion_min_deg: float = 0.0
    flexion_max_deg: float = 180.0
    flexion_step_deg: float = 1.0
    wrap_max_deg: float = 60.0
    tip_threshold: float = 0.8

    def __post_init__(self):
        if self.palm_radius <= 0:
            raise ValueError("palm_radius must be positive")
        if not (0.0 < self.pair_gap < 2.0 * self.palm_radius):
            raise ValueError("pair_gap must lie in (0, 2 * palm_radius)")
        if not (self.flexion_min_deg < self.flexion_max_deg):
            raise ValueError("flexion_min_deg must be below flexion_max_deg")
        if self.flexion_step_deg <= 0 or self.wrap_max_deg < 0:
            raise ValueError("flexion_step_deg must be positive and wrap_max_deg non-negative")
        if not (0.0 <= self.tip_threshold <= 1.0):
            raise ValueError("tip_threshold must lie in [0, 1]")
        if len(self.concentric_azimuths_deg) != N_FINGERS:
            raise ValueError("concentric_azimuths_deg needs four entries")
        object.__setattr__(self, "concentric_azimuths_deg", tuple(float(v) for v in self.concentric_azimuths_deg))

    @property
    def flexion_min(self) -> float:
        return math.radians(self.flexion_min_deg)

    @property
    def flexion_max(self) -> float:
        return math.radians(self.flexion_max_deg)

    @property
    def flexion_step(self) -> float:
        return math.radians(self.flexion_step_deg)

    @property
    def wrap_max(self) -> float:
        return math.radians(self.wrap_max_deg)

    @property
    def contact_radius(self) -> float:
        # the finger is swept as a capsule as wide as its pad
        return self.linkage.finger_width / 2.0


DEFAULT_GRIPPER = GripperConfig()


def _endpoints(config: GripperConfig) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    axis = math.radians(config.grasp_axis_deg)
    half = math.asin(config.pair_gap / (2.0 * config.palm_radius))
    par_az = np.array([axis - half, axis + half, axis + math.pi - half, axis + math.pi + half])
    par_heading = np.array([axis, axis, axis + math.pi, axis + math.pi])
    conc = np.radians(config.concentric_azimuths_deg)
    return par_az, conc, par_heading, conc


def _check_spread(spread: float) -> None:
    if not (0.0 <= spread <= 1.0) or math.isnan(spread):
        raise OutOfRange(f"spread must lie in [0, 1], got {spread}")


def spread_azimuths(spread: float, config: GripperConfig = DEFAULT_GRIPPER) -> np.ndarray:
    """Angular positions (rad) of the four finger mounts about the grasp axis.

    Linear in ``spread`` between the parallel layout (fingers 1, 2 opposing 3, 4
    across the grasp axis, each pair ``pair_gap`` apart) and the concentric one.
    """
    _check_spread(spread)
    par, conc, _, _ = _endpoints(config)
    return par + spread * (conc - par)


def spread_headings(spread: float, config: GripperConfig = DEFAULT_GRIPPER) -> np.ndarray:
    """Outward direction (rad) of each finger's flexion plane; fingers close towards
    the opposite direction."""
    _check_spread(spread)
    _, _, par, conc = _endpoints(config)
    return par + spread * (conc - par)


@dataclass(frozen=True)
class FingerState:
    flexion: float
    azimuth: float
    mode: ContactMode = ContactMode.RIGID
    wrap: float = 0.0


@dataclass(frozen=True)
class GripperState:
    spread: float
    fingers: tuple
    base_pose: Pose = field(default_factory=lambda: Pose(np.zeros(3)))

    def __post_init__(self):
        _check_spread(self.spread)
        if len(self.fingers) != N_FINGERS:
            raise ValueError("gripper has exactly four fingers")
        object.__setattr__(self, "fingers", tuple(self.fingers))

    @classmethod
    def open(cls, spread: float, base_pose: Optional[Pose] = None,
             config: GripperConfig = DEFAULT_GRIPPER, flexion: Optional[float] = None) -> "GripperState":
        flex = config.flexion_min if flexion is None else flexion
        if not (config.flexion_min - 1e-12 <= flex <= config.flexion_max + 1e-12):
            raise OutOfRange(f"flexion {flex} outside the configured range")
        az = spread_azimuths(spread, config)
        fingers = tuple(FingerState(flex, float(a)) for a in az)
        return cls(spread, fingers, base_pose if base_pose is not None else Pose(np.zeros(3)))

    def with_flexions(self, flexions: Sequence[float]) -> "GripperState":
        return replace(self, fingers=tuple(replace(f, flexion=float(x)) for f, x in zip(self.fingers, flexions)))

    def with_pose(self, base_pose: Pose) -> "GripperState":
        return replace(self, base_pose=base_pose)


def finger_frames(state: GripperState, config: GripperConfig = DEFAULT_GRIPPER):
    """Mount points and inward unit vectors of the four fingers, gripper frame."""
    az = np.array([f.azimuth for f in state.fingers])
    heading = spread_headings(state.spread, config)
    mounts = config.palm_radius * np.stack([np.cos(az), np.sin(az), np.zeros(4)], axis=1)
    inward = -np.stack([np.cos(heading), np.sin(heading), np.zeros(4)], axis=1)
    return mounts, inward, heading


def _to_gripper(mount, inward, planar) -> np.ndarray:
    planar = np.atleast_2d(planar)
    return mount[None, :] + planar[:, 0:1] * np.array([0.0, 0.0, 1.0]) + planar[:, 1:2] * inward[None, :]


def finger_points(state: GripperState, config: GripperConfig = DEFAULT_GRIPPER,
                  arc: Optional[np.ndarray] = None) -> np.ndarray:
    """Sampled finger centre-line points, shape ``(4, n_arc, 3)``, gripper frame."""
    arc = np.linspace(0.0, 1.0, ARC_SAMPLES) if arc is None else np.asarray(arc, dtype=float)
    mounts, inward, _ = finger_frames(state, config)
    out = np.empty((N_FINGERS, len(arc), 3))
    for i, f in enumerate(state.fingers):
        pose = finger_fk(config.linkage, f.flexion, f.wrap)
        out[i] = _to_gripper(mounts[i], inward[i], arc_points(config.linkage, pose, arc))
    return out


def fingertips(state: GripperState, config: GripperConfig = DEFAULT_GRIPPER) -> np.ndarray:
    """Fingertip positions, shape ``(4, 3)``, gripper frame."""
    return finger_points(state, config, arc=np.array([1.0]))[:, 0, :]


def aperture(state: GripperState, config: GripperConfig = DEFAULT_GRIPPER) -> float:
    """Diameter of the largest axis-centred circle clear of all four fingertip pads.

    Each pad is a segment of ``finger_width`` across its finger at the tip,
    projected on the palm plane. Zero once any tip reaches or crosses the axis
    along its closing direction.
    """
    tips = fingertips(state, config)[:, :2]
    _, _, heading = finger_frames(state, config)
    half = config.linkage.finger_width / 2.0
    best = math.inf
    for tip, h in zip(tips, heading):
        outward = np.array([math.cos(h), math.sin(h)])
        across = np.array([-math.sin(h), math.cos(h)])
        depth = float(tip @ outward)
        if depth <= 0.0:
            return 0.0
        lateral = float(tip @ across)
        offset = max(abs(lateral) - half, 0.0)
        best = min(best, math.hypot(depth, offset))
    return 2.0 * best


def contact_mode(contact_arc_position: float, threshold: float = 0.8) -> ContactMode:
    """Fingertip contacts keep the four-bar rigid; belt contacts make it compliant."""
    if not (0.0 <= contact_arc_position <= 1.0) or math.isnan(contact_arc_position):
        raise OutOfRange(f"contact arc position must lie in [0, 1], got {contact_arc_position}")
    return ContactMode.RIGID if contact_arc_position >= threshold else ContactMode.COMPLIANT


@dataclass(frozen=True)
class Contact:
    finger: int
    item_id: Optional[int]
    arc_position: float
    mode: ContactMode
    point: np.ndarray = field(compare=False)


def _item_arrays(scene, centre_world: np.ndarray, reach: float):
    if scene is None or not scene.items:
        return np.empty(0, dtype=int), np.empty((0, 3)), np.empty((0, 3, 3)), np.empty((0, 3))
    arr = scene.arrays
    near = np.linalg.norm(arr.centers - centre_world, axis=1) <= reach + arr.semi_axes.max(axis=1)
    return arr.ids[near], arr.centers[near], arr.rotations[near], arr.semi_axes[near]


def _crate_hits(scene, pts: np.ndarray, inflate: float) -> np.ndarray:
    if scene is None:
        return np.zeros(len(pts), dtype=bool)
    crate = scene.crate
    hx, hy = crate.length / 2.0 - inflate, crate.width / 2.0 - inflate
    below_rim = pts[:, 2] < crate.wall_height
    return (pts[:, 2] < inflate) | (below_rim & ((np.abs(pts[:, 0]) > hx) | (np.abs(pts[:, 1]) > hy)))


def close_fingers(state: GripperState, scene: Optional["Scene"], max_steps: int = 400,
                  config: GripperConfig = DEFAULT_GRIPPER) -> tuple[GripperState, list[Contact]]:
    """Quasi-static closure at a fixed base pose.

    Every unsettled finger advances one flexion step per iteration. A finger that
    would penetrate an item or the crate stays at its last free angle and records
    a contact. A fingertip contact settles the finger (rigid four-bar); a belt
    contact switches it to compliant mode, after which the distal segment keeps
    curling around the obstruction until it touches something or reaches
    ``wrap_max``. Items that already overlap a finger before closing are treated
    as pushed aside and ignored by that finger; likewise a finger that starts
    pressed against the crate ignores the crate.
    """
    arc = np.linspace(0.0, 1.0, ARC_SAMPLES)
    distal = arc > config.linkage.belt_fraction
    pose = state.base_pose
    mounts, inward, _ = finger_frames(state, config)
    reach = config.palm_radius + config.linkage.finger_length + 2.0 * config.contact_radius
    ids, centers, rots, axes = _item_arrays(scene, pose.position, reach)
    inflate = config.contact_radius

    def world_points(i, flexion, wrap):
        fp = finger_fk(config.linkage, flexion, wrap)
        local = _to_gripper(mounts[i], inward[i], arc_points(config.linkage, fp, arc))
        return pose.transform(local)

    # items each finger can possibly sweep into
    mounts_world = pose.transform(mounts)
    span = config.linkage.finger_length + inflate + (axes.max(axis=1) if len(axes) else 0.0)
    reachable = [np.linalg.norm(centers - m, axis=1) <= span for m in mounts_world]

    def collisions(i, pts, mask, ignore):
        level = np.full((len(ids), len(pts)), np.inf)
        sel = reachable[i]
        level[sel] = inflated_ellipsoid_level(pts, centers[sel], rots[sel], axes[sel], inflate)
        if len(ignore):
            level[ignore] = np.inf
        level[:, ~mask] = np.inf
        crate = _crate_hits(scene, pts, inflate) & mask
        return level, crate

    flex = [f.flexion for f in state.fingers]
    wrap = [f.wrap for f in state.fingers]
    mode = [f.mode for f in state.fingers]
    settled = [False] * N_FINGERS
    ignore = []
    # fingers already pressed into the crate flex along it rather than stop on it
    ignore_crate = []
    for i in range(N_FINGERS):
        level, crate = collisions(i, world_points(i, flex[i], wrap[i]), np.ones(len(arc), bool), np.empty(0, int))
        ignore.append(np.nonzero((level < 1.0).any(axis=1))[0])
        ignore_crate.append(bool(crate.any()))
        if flex[i] >= config.flexion_max - 1e-12 and mode[i] is ContactMode.RIGID:
            settled[i] = True

    contacts: list[Contact] = []
    step = config.flexion_step
    for _ in range(max_steps):
        if all(settled):
            break
        for i in range(N_FINGERS):
            if settled[i]:
                continue
            wrapping = mode[i] is ContactMode.COMPLIANT
            if wrapping:
                new_flex, new_wrap, mask = flex[i], min(wrap[i] + step, config.wrap_max), distal
            else:
                new_flex, new_wrap, mask = min(flex[i] + step, config.flexion_max), wrap[i], np.ones(len(arc), bool)
            pts = world_points(i, new_flex, new_wrap)
            level, crate = collisions(i, pts, mask, ignore[i])
            if ignore_crate[i]:
                crate[:] = False
            hit_item = level < 1.0
            if hit_item.any() or crate.any():
                if hit_item.any():
                    n, k = np.unravel_index(np.argmin(level), level.shape)
                    item_id, k = int(ids[n]), int(k)
                else:
                    k, item_id = int(np.nonzero(crate)[0][0]), None
                pos = float(arc[k])
                m = contact_mode(pos, config.tip_threshold)
                contacts.append(Contact(i, item_id, pos, m, pts[k]))
                if not wrapping and m is ContactMode.COMPLIANT and wrap[i] < config.wrap_max:
                    mode[i] = ContactMode.COMPLIANT
                else:
                    if m is ContactMode.COMPLIANT:
                        mode[i] = ContactMode.COMPLIANT
                    settled[i] = True
                continue
            flex[i], wrap[i] = new_flex, new_wrap
            if wrapping and new_wrap >= config.wrap_max - 1e-12:
                settled[i] = True
            elif not wrapping and new_flex >= config.flexion_max - 1e-12:
                settled[i] = True
    else:
        if not all(settled):
            raise StepLimit(f"fingers still moving after {max_steps} steps")

    fingers = tuple(
        replace(f, flexion=flex[i], wrap=wrap[i], mode=mode[i]) for i, f in enumerate(state.fingers)
    )
    return replace(state, fingers=fingers), contacts

"""Crate, punnet and produce items, with the quasi-static predicates that decide
whether fingers get in, which items end up held, and which fall out in transit.

World frame: crate floor at ``z = 0``, crate centred on the origin, ``z`` up.
"""

from __future__ import annotations

import enum
import json
import math
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path
from typing import Optional, Sequence

import numpy as np
from scipy.spatial import cKDTree

from . import gripper as gr
from .errors import InvariantViolation, PackingFailure
from .geometry import (
    convex_hull_2d,
    inflated_ellipsoid_level,
    polygon_area,
    ray_ellipsoid_entry,
    signed_distance_to_polygon,
)
from .spatial import Pose, quat_from_axis_angle

MIN_SEMI_AXIS = 0.0025
MAX_SEMI_AXIS = 0.025


class Shape(str, enum.Enum):
    SPHERE = "Sphere"
    ELLIPSOID = "Ellipsoid"


class Compliance(str, enum.Enum):
    SOFT = "Soft"
    RIGID = "Rigid"


class ObjectType(str, enum.Enum):
    LIME = "Lime"
    PICKLE = "Pickle"


class Density(str, enum.Enum):
    SPARSE_SINGLE = "SparseSingle"
    FULL = "Full"


@dataclass(frozen=True)
class Item:
    id: int
    shape: Shape
    semi_axes: tuple
    compliance: Compliance
    pose: Pose

    def __post_init__(self):
        axes = tuple(float(a) for a in self.semi_axes)
        if len(axes) == 1:
            axes = axes * 3
        if len(axes) != 3:
            raise ValueError("semi_axes needs one (sphere) or three values")
        if self.shape is Shape.SPHERE and not (axes[0] == axes[1] == axes[2]):
            raise ValueError("a sphere has equal semi-axes")
        for a in axes:
            if not (MIN_SEMI_AXIS - 1e-12 <= a <= MAX_SEMI_AXIS + 1e-12):
                raise InvariantViolation(f"item {self.id}: semi-axis {a} m outside [5, 50] mm diameter range")
        object.__setattr__(self, "semi_axes", axes)
        object.__setattr__(self, "shape", Shape(self.shape))
        object.__setattr__(self, "compliance", Compliance(self.compliance))

    @classmethod
    def sphere(cls, id: int, radius: float, compliance: Compliance, center) -> "Item":
        return cls(id, Shape.SPHERE, (radius,) * 3, compliance, Pose(center))

    @property
    def center(self) -> np.ndarray:
        return self.pose.position

    @property
    def extent(self) -> float:
        return max(self.semi_axes)

    @property
    def volume(self) -> float:
        a, b, c = self.semi_axes
        return 4.0 / 3.0 * math.pi * a * b * c

    def proxy_spheres(self) -> tuple[np.ndarray, np.ndarray]:
        """Spheres covering the item, used for packing and overlap checks.

        A prolate ellipsoid becomes three spheres of its minor radius strung
        along the major axis.
        """
        a, b, c = self.semi_axes
        if self.shape is Shape.SPHERE or a == b == c:
            return self.center[None, :], np.array([a])
        k = int(np.argmax(self.semi_axes))
        minor = min(a, b, c)
        axis = self.pose.rotation[:, k]
        span = self.semi_axes[k] - minor
        offsets = np.array([-span, 0.0, span])
        return self.center[None, :] + offsets[:, None] * axis[None, :], np.full(3, minor)

    def to_dict(self) -> dict:
        return {
            "id": self.id,
            "shape": self.shape.value,
            "semi_axes": list(self.semi_axes),
            "compliance": self.compliance.value,
            "pose": self.pose.to_dict(),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "Item":
        return cls(int(d["id"]), Shape(d["shape"]), tuple(d["semi_axes"]), Compliance(d["compliance"]),
                   Pose.from_dict(d["pose"]))


@dataclass(frozen=True)
class Crate:
    length: float = 0.40
    width: float = 0.30
    wall_height: float = 0.12

    def contains(self, point, margin: float = 0.0) -> bool:
        x, y, z = point
        return (abs(x) <= self.length / 2 - margin + 1e-12 and abs(y) <= self.width / 2 - margin + 1e-12
                and z >= margin - 1e-12)

    @property
    def volume(self) -> float:
        return self.length * self.width * self.wall_height


@dataclass(frozen=True)
class Punnet:
    length: float = 0.18
    width: float = 0.12
    height: float = 0.06
    pose: Pose = field(default_factory=lambda: Pose([0.10, 0.55, 0.0]))


@dataclass(frozen=True)
class SceneConfig:
    crate: Crate = field(default_factory=Crate)
    punnet: Punnet = field(default_factory=Punnet)
    pick_height: float = 0.015
    lime_semi_axes: tuple = (0.025, 0.015, 0.015)
    lime_scale_range: tuple = (0.9, 1.0)
    pickle_radius_range: tuple = (0.010, 0.020)
    fill_fraction: float = 0.22
    scatter_count: tuple = (2, 5)
    scatter_min_distance: float = 0.10
    pick_jitter: float = 0.003
    drop_candidates: int = 8
    max_attempts: int = 20000
    soft_overlap: float = 0.20
    overlap_tolerance: float = 1e-6
    clearance_tol: float = 0.0  # m of allowed overlap with rigid items; 0 = full finger width
    lateral_search_radius: float = 0.015
    lift_margin: float = 0.005
    drop_threshold: float = 0.010
    retention_jitter: float = 0.002
    soft_compression: float = 0.20
    soft_palm_fraction: float = 0.5  # soft items slide off the outer palm
    cage_fill: float = 0.18

    def __post_init__(self):
        if not (0.0 < self.fill_fraction < 0.6):
            raise ValueError("fill_fraction must lie in (0, 0.6)")
        lo, hi = self.pickle_radius_range
        if not (MIN_SEMI_AXIS <= lo <= hi <= MAX_SEMI_AXIS):
            raise ValueError("pickle_radius_range must lie within [0.0025, 0.025] m")
        for name in ("clearance_tol", "lateral_search_radius", "lift_margin", "drop_threshold",
                     "retention_jitter", "soft_compression", "pick_height", "soft_palm_fraction",
                     "cage_fill"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be non-negative")
        object.__setattr__(self, "lime_semi_axes", tuple(self.lime_semi_axes))
        object.__setattr__(self, "lime_scale_range", tuple(self.lime_scale_range))
        object.__setattr__(self, "pickle_radius_range", tuple(self.pickle_radius_range))
        object.__setattr__(self, "scatter_count", tuple(int(v) for v in self.scatter_count))


DEFAULT_SCENE = SceneConfig()


@dataclass(frozen=True)
class ItemArrays:
    ids: np.ndarray
    centers: np.ndarray
    rotations: np.ndarray
    semi_axes: np.ndarray
    soft: np.ndarray


@dataclass(frozen=True)
class Scene:
    crate: Crate
    punnet: Punnet
    items: tuple
    pick_pose: Pose

    def __post_init__(self):
        object.__setattr__(self, "items", tuple(self.items))
        ids = [it.id for it in self.items]
        if len(set(ids)) != len(ids):
            raise InvariantViolation("item ids must be unique within a scene")
        for it in self.items:
            if not self.crate.contains(it.center):
                raise InvariantViolation(f"item {it.id} centre lies outside the crate")

    @cached_property
    def arrays(self) -> ItemArrays:
        n = len(self.items)
        return ItemArrays(
            ids=np.array([it.id for it in self.items], dtype=int),
            centers=np.array([it.center for it in self.items]).reshape(n, 3),
            rotations=np.array([it.pose.rotation for it in self.items]).reshape(n, 3, 3),
            semi_axes=np.array([it.semi_axes for it in self.items]).reshape(n, 3),
            soft=np.array([it.compliance is Compliance.SOFT for it in self.items], dtype=bool),
        )

    def item(self, item_id: int) -> Item:
        for it in self.items:
            if it.id == item_id:
                return it
        raise KeyError(item_id)

    def to_dict(self) -> dict:
        return {
            "crate": {"length": self.crate.length, "width": self.crate.width,
                      "wall_height": self.crate.wall_height},
            "punnet": {"length": self.punnet.length, "width": self.punnet.width,
                       "height": self.punnet.height, "pose": self.punnet.pose.to_dict()},
            "pick_pose": self.pick_pose.to_dict(),
            "items": [it.to_dict() for it in self.items],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "Scene":
        p = d["punnet"]
        return cls(
            Crate(**d["crate"]),
            Punnet(p["length"], p["width"], p["height"], Pose.from_dict(p["pose"])),
            tuple(Item.from_dict(it) for it in d["items"]),
            Pose.from_dict(d["pick_pose"]),
        )

    def __eq__(self, other):
        if not isinstance(other, Scene):
            return NotImplemented
        return self.to_dict() == other.to_dict()

    def __hash__(self):
        return id(self)


def write_scene_json(scene: Scene, path) -> None:
    Path(path).write_text(json.dumps(scene.to_dict(), indent=1))


def read_scene_json(path) -> Scene:
    return Scene.from_dict(json.loads(Path(path).read_text()))


def overlapping_pairs(scene: Scene, config: SceneConfig = DEFAULT_SCENE) -> list[tuple[int, int]]:
    """Item id pairs whose proxy spheres overlap beyond the allowed tolerance.

    Two soft items may interpenetrate by up to ``soft_overlap`` of the smaller
    radius.
    """
    centres, radii, owner = [], [], []
    for idx, it in enumerate(scene.items):
        c, r = it.proxy_spheres()
        centres.append(c)
        radii.append(r)
        owner.extend([idx] * len(r))
    if not centres:
        return []
    centres = np.concatenate(centres)
    radii = np.concatenate(radii)
    owner = np.array(owner)
    tree = cKDTree(centres)
    bad = set()
    for i, j in tree.query_pairs(2.0 * radii.max()):
        a, b = owner[i], owner[j]
        if a == b:
            continue
        allowed = config.overlap_tolerance
        if scene.items[a].compliance is Compliance.SOFT and scene.items[b].compliance is Compliance.SOFT:
            allowed += config.soft_overlap * min(radii[i], radii[j])
        if np.linalg.norm(centres[i] - centres[j]) < radii[i] + radii[j] - allowed:
            bad.add((scene.items[a].id, scene.items[b].id))
    return sorted(bad)


@dataclass(frozen=True)
class PopulationSpec:
    object_type: ObjectType
    density: Density
    seed: int
    scatter_count: Optional[tuple] = None

    def __post_init__(self):
        object.__setattr__(self, "object_type", ObjectType(self.object_type))
        object.__setattr__(self, "density", Density(self.density))


def default_pick_pose(config: SceneConfig = DEFAULT_SCENE) -> Pose:
    return Pose([0.0, 0.0, config.pick_height])


def _draw_item(rng: np.random.Generator, object_type: ObjectType, item_id: int, config: SceneConfig):
    """Shape parameters and yaw for a fresh item (position filled in later)."""
    if object_type is ObjectType.PICKLE:
        r = float(rng.uniform(*config.pickle_radius_range))
        return Shape.SPHERE, (r, r, r), Compliance.SOFT, 0.0
    scale = float(rng.uniform(*config.lime_scale_range))
    axes = tuple(min(max(a * scale, MIN_SEMI_AXIS), MAX_SEMI_AXIS) for a in config.lime_semi_axes)
    return Shape.ELLIPSOID, axes, Compliance.RIGID, float(rng.uniform(0.0, math.pi))


def _lying_pose(center, yaw: float) -> Pose:
    return Pose(center, quat_from_axis_angle([0.0, 0.0, 1.0], yaw))


def _proxy_layout(axes, yaw):
    """Horizontal offsets and radii of the proxy spheres of a lying item."""
    a, b, c = axes
    if a == b == c:
        return np.zeros((1, 2)), np.array([a]), a
    minor = min(b, c)
    span = a - minor
    d = np.array([math.cos(yaw), math.sin(yaw)])
    return np.array([-span, 0.0, span])[:, None] * d[None, :], np.full(3, minor), minor


class _Pile:
    """Proxy spheres deposited so far."""

    def __init__(self, capacity: int = 1024):
        self.centres = np.empty((capacity, 3))
        self.radii = np.empty(capacity)
        self.n = 0

    def rest_heights(self, pts: np.ndarray, radii: np.ndarray, floor_height: float) -> np.ndarray:
        """Lowest centre height at which each candidate proxy set touches nothing.

        ``pts`` has shape ``(m, k, 2)`` for ``m`` candidate spots of ``k`` proxies.
        """
        out = np.full(len(pts), floor_height)
        if self.n == 0:
            return out
        c = self.centres[: self.n]
        r = self.radii[: self.n]
        d2 = ((pts[:, :, None, :] - c[None, None, :, :2]) ** 2).sum(axis=3)
        gap = (radii[None, :, None] + r[None, None, :]) ** 2 - d2
        lift = np.where(gap > 0.0, c[None, None, :, 2] + np.sqrt(np.maximum(gap, 0.0)), -np.inf)
        return np.maximum(out, lift.max(axis=(1, 2)))

    def rest_height(self, xy: np.ndarray, radii: np.ndarray, floor_height: float) -> float:
        return float(self.rest_heights(xy[None], radii, floor_height)[0])

    def add(self, xy: np.ndarray, radii: np.ndarray, z: float) -> None:
        k = len(radii)
        if self.n + k > len(self.radii):
            self.centres = np.concatenate([self.centres, np.empty_like(self.centres)])
            self.radii = np.concatenate([self.radii, np.empty_like(self.radii)])
        self.centres[self.n:self.n + k, :2] = xy
        self.centres[self.n:self.n + k, 2] = z
        self.radii[self.n:self.n + k] = radii
        self.n += k


def _fits_laterally(xy: np.ndarray, radii: np.ndarray, crate: Crate) -> bool:
    return bool(np.all(np.abs(xy[:, 0]) + radii <= crate.length / 2)
                and np.all(np.abs(xy[:, 1]) + radii <= crate.width / 2))


def populate(spec: PopulationSpec, crate: Optional[Crate] = None,
             config: SceneConfig = DEFAULT_SCENE) -> Scene:
    """Seeded scene generation.

    ``SparseSingle`` puts one item on the floor at the pick point (horizontal
    offset at most ``pick_jitter``) and scatters a few more well away from it.
    ``Full`` deposits items one at a time until their total volume reaches
    ``fill_fraction`` of the crate: each item tries ``drop_candidates`` random
    spots, falls straight down until it rests on the floor or another item, and
    keeps the lowest resting spot. Items may not rise above the rim.
    """
    crate = crate or config.crate
    rng = np.random.default_rng(spec.seed)
    pick = default_pick_pose(config)
    items: list[Item] = []
    pile = _Pile()

    if spec.density is Density.SPARSE_SINGLE:
        lo, hi = spec.scatter_count or config.scatter_count
        n_scatter = int(rng.integers(lo, hi + 1))
        shape, axes, comp, yaw = _draw_item(rng, spec.object_type, 0, config)
        ang, rad = rng.uniform(0, 2 * math.pi), config.pick_jitter * math.sqrt(rng.uniform())
        xy0 = pick.position[:2] + rad * np.array([math.cos(ang), math.sin(ang)])
        offs, radii, h = _proxy_layout(axes, yaw)
        pile.add(xy0 + offs, radii, h)
        items.append(Item(0, shape, axes, comp, _lying_pose([xy0[0], xy0[1], h], yaw)))
        attempts = 0
        while len(items) < 1 + n_scatter:
            attempts += 1
            if attempts > config.max_attempts:
                raise PackingFailure("could not scatter sparse items")
            shape, axes, comp, yaw = _draw_item(rng, spec.object_type, len(items), config)
            offs, radii, h = _proxy_layout(axes, yaw)
            xy = np.array([rng.uniform(-crate.length / 2, crate.length / 2),
                           rng.uniform(-crate.width / 2, crate.width / 2)])
            pts = xy + offs
            if not _fits_laterally(pts, radii, crate):
                continue
            if np.linalg.norm(xy - pick.position[:2]) < config.scatter_min_distance:
                continue
            if pile.rest_height(pts, radii, h) > h + 1e-12:
                continue
            pile.add(pts, radii, h)
            items.append(Item(len(items), shape, axes, comp, _lying_pose([xy[0], xy[1], h], yaw)))
        return Scene(crate, config.punnet, tuple(items), pick)

    target = config.fill_fraction * crate.volume
    volume = 0.0
    attempts = 0
    while volume < target:
        shape, axes, comp, yaw = _draw_item(rng, spec.object_type, len(items), config)
        offs, radii, h = _proxy_layout(axes, yaw)
        half = np.array([crate.length / 2, crate.width / 2])
        xy = rng.uniform(-half, half, size=(config.drop_candidates, 2))
        attempts += config.drop_candidates
        pts = xy[:, None, :] + offs[None, :, :]
        fits = np.all(np.abs(pts) + radii[None, :, None] <= half[None, None, :], axis=(1, 2))
        z = pile.rest_heights(pts, radii, h)
        ok = fits & (z + h <= crate.wall_height)
        best = None
        if ok.any():
            k = int(np.argmin(np.where(ok, z, np.inf)))
            best = (float(z[k]), xy[k], pts[k])
        if best is None:
            if attempts > config.max_attempts:
                raise PackingFailure(
                    f"fill fraction {config.fill_fraction} unreachable after {attempts} attempts "
                    f"({len(items)} items placed)"
                )
            continue
        z, xy, pts = best
        pile.add(pts, radii, z)
        it = Item(len(items), shape, axes, comp, _lying_pose([xy[0], xy[1], z], yaw))
        items.append(it)
        volume += it.volume
    return Scene(crate, config.punnet, tuple(items), pick)


def fill_estimate(config: SceneConfig, item_volume: float, crate: Optional[Crate] = None) -> float:
    crate = crate or config.crate
    return config.fill_fraction * crate.volume / item_volume


# --- gripper/scene interaction ----------------------------------------------


class Insertion(str, enum.Enum):
    INSERTED = "Inserted"
    BLOCKED = "Blocked"


@dataclass(frozen=True)
class Capsule:
    start: np.ndarray
    end: np.ndarray
    radius: float

    def points(self, n: int = 11) -> np.ndarray:
        u = np.linspace(0.0, 1.0, n)[:, None]
        return self.start[None, :] + u * (self.end - self.start)[None, :]


def footprint(state: gr.GripperState, config: gr.GripperConfig = gr.DEFAULT_GRIPPER) -> list[Capsule]:
    """World-frame capsules occupied by the four fingers at ``state.base_pose``.

    The capsule radius is half the finger width: a finger needs a gap at least
    that wide to slip between items.
    """
    pts = gr.finger_points(state, config, arc=np.array([0.0, 1.0]))
    world = state.base_pose.transform(pts.reshape(-1, 3)).reshape(pts.shape)
    r = config.linkage.finger_width / 2.0
    return [Capsule(w[0], w[1], r) for w in world]


def push_aside(state: gr.GripperState, scene: Scene,
               config: gr.GripperConfig = gr.DEFAULT_GRIPPER) -> Scene:
    """Scene after the inserted fingers have shoved overlapping soft items clear.

    Each soft item cut by a finger capsule moves horizontally, away from the
    finger, until it just touches it. Rigid items are left alone: they block
    or were already cleared by :func:`insertion_check`.
    """
    capsules = footprint(state, config)
    moved = {}
    for it in scene.items:
        if it.compliance is not Compliance.SOFT:
            continue
        c = it.center.copy()
        for cap in capsules:
            seg = cap.end - cap.start
            u = float(np.clip((c - cap.start) @ seg / (seg @ seg), 0.0, 1.0))
            closest = cap.start + u * seg
            away = c - closest
            away[2] = 0.0
            need = it.extent + cap.radius
            dist = float(np.linalg.norm(c - closest))
            if dist >= need:
                continue
            n = float(np.linalg.norm(away))
            if n < 1e-9:
                away = np.array([-seg[1], seg[0], 0.0])
                n = float(np.linalg.norm(away))
                if n < 1e-9:
                    away, n = np.array([1.0, 0.0, 0.0]), 1.0
            # horizontal shift that restores the clearance
            dz = c[2] - closest[2]
            horiz = math.sqrt(max(need * need - dz * dz, 0.0))
            c = closest + away / n * horiz
            c[2] = it.center[2]
        if not np.array_equal(c, it.center):
            lim = np.array([scene.crate.length / 2, scene.crate.width / 2])
            c[:2] = np.clip(c[:2], -lim, lim)
            moved[it.id] = Item(it.id, it.shape, it.semi_axes, it.compliance,
                                Pose(c, it.pose.orientation))
    if not moved:
        return scene
    items = tuple(moved.get(it.id, it) for it in scene.items)
    return Scene(scene.crate, scene.punnet, items, scene.pick_pose)


def _rigid_arrays(scene: Scene):
    arr = scene.arrays
    keep = ~arr.soft
    return arr.ids[keep], arr.centers[keep], arr.rotations[keep], arr.semi_axes[keep]


def _capsule_blockers(capsule: Capsule, rigid, clearance: float, shift=np.zeros(3)) -> np.ndarray:
    ids, centers, rots, axes = rigid
    if len(ids) == 0:
        return np.zeros(0, dtype=bool)
    inflate = max(capsule.radius - clearance, 0.0)
    level = inflated_ellipsoid_level(capsule.points() + shift, centers, rots, axes, inflate)
    return (level < 1.0).any(axis=1)


def _lateral_shifts(capsule: Capsule, radius: float, rings: int = 2, directions: int = 8) -> list[np.ndarray]:
    axis = capsule.end - capsule.start
    axis = axis / np.linalg.norm(axis)
    ref = np.array([1.0, 0.0, 0.0]) if abs(axis[0]) < 0.9 else np.array([0.0, 1.0, 0.0])
    u = np.cross(axis, ref)
    u /= np.linalg.norm(u)
    v = np.cross(axis, u)
    out = []
    for k in range(1, rings + 1):
        rho = radius * k / rings
        for j in range(directions):
            a = 2.0 * math.pi * j / directions
            out.append(rho * (math.cos(a) * u + math.sin(a) * v))
    return out


def insertion_check(gripper_footprint: Sequence[Capsule], scene: Scene,
                    config: SceneConfig = DEFAULT_SCENE) -> list[Insertion]:
    """Whether each finger can reach its descent position among rigid items.

    A finger is blocked when its capsule cuts into a rigid item deeper than the
    clearance tolerance and none of the laterally shifted capsules within the
    search radius is clear (i.e. there is no finger-wide gap nearby). Soft
    items compress and never block.
    """
    rigid = _rigid_arrays(scene)
    out = []
    for cap in gripper_footprint:
        hit = _capsule_blockers(cap, rigid, config.clearance_tol)
        if not hit.any():
            out.append(Insertion.INSERTED)
            continue
        clear = any(
            not _capsule_blockers(cap, rigid, config.clearance_tol, shift).any()
            for shift in _lateral_shifts(cap, config.lateral_search_radius)
        )
        out.append(Insertion.INSERTED if clear else Insertion.BLOCKED)
    return out


def blocking_items(capsule: Capsule, scene: Scene, config: SceneConfig = DEFAULT_SCENE) -> list[int]:
    rigid = _rigid_arrays(scene)
    hit = _capsule_blockers(capsule, rigid, config.clearance_tol)
    return [int(i) for i in rigid[0][hit]]


def palm_points(config: gr.GripperConfig = gr.DEFAULT_GRIPPER, rings: int = 2, directions: int = 8) -> np.ndarray:
    pts = [np.zeros(3)]
    for k in range(1, rings + 1):
        rho = config.palm_radius * k / rings
        for j in range(directions):
            a = 2.0 * math.pi * j / directions
            pts.append(np.array([rho * math.cos(a), rho * math.sin(a), 0.0]))
    return np.array(pts)


@dataclass(frozen=True)
class ObstructionHit:
    travel: float
    point: np.ndarray
    cause: str
    item_id: Optional[int] = None


def first_obstruction(state: gr.GripperState, direction, scene: Scene,
                      config: gr.GripperConfig = gr.DEFAULT_GRIPPER,
                      scene_config: SceneConfig = DEFAULT_SCENE,
                      blocked_fingers: Sequence[int] = ()) -> ObstructionHit:
    """Travel along ``direction`` until the gripper first touches something solid.

    Candidates: the fingertip centroid reaching the crate floor, the palm face landing
    on an item (soft items count once squeezed by ``soft_compression``, and only
    when centred under the inner ``soft_palm_fraction`` of the palm), and the
    tips of ``blocked_fingers`` landing on rigid items.
    """
    direction = np.asarray(direction, dtype=float)
    direction = direction / np.linalg.norm(direction)
    pose = state.base_pose
    palm = pose.transform(palm_points(config))
    best = ObstructionHit(math.inf, pose.position, "none")

    inflate = config.contact_radius
    if direction[2] < 0:
        # fingers flex along the floor, so the floor stops the fingertip centroid
        tcp = pose.transform(gr.fingertips(state, config)).mean(axis=0)
        travel = max((float(tcp[2]) - inflate) / -direction[2], 0.0)
        best = ObstructionHit(travel, tcp + travel * direction, "floor")

    local = palm_points(config)
    inner_radius = scene_config.soft_palm_fraction * config.palm_radius
    inner = palm[np.linalg.norm(local[:, :2], axis=1) <= inner_radius + 1e-12]
    arr = scene.arrays
    # a soft item met off-centre slides aside instead of stopping the palm
    centred = np.linalg.norm(pose.inverse_transform(arr.centers)[:, :2], axis=1) <= inner_radius
    for n in range(len(arr.ids)):
        if arr.soft[n]:
            if not centred[n]:
                continue
            axes = arr.semi_axes[n] * (1.0 - scene_config.soft_compression)
            s = ray_ellipsoid_entry(inner, direction, arr.centers[n], arr.rotations[n], axes)
            k = int(np.argmin(s))
            if s[k] < best.travel:
                best = ObstructionHit(float(s[k]), inner[k] + s[k] * direction, "palm", int(arr.ids[n]))
            continue
        s = ray_ellipsoid_entry(palm, direction, arr.centers[n], arr.rotations[n], arr.semi_axes[n])
        k = int(np.argmin(s))
        if s[k] < best.travel:
            best = ObstructionHit(float(s[k]), palm[k] + s[k] * direction, "palm", int(arr.ids[n]))

    if blocked_fingers:
        tips = pose.transform(gr.fingertips(state, config)[list(blocked_fingers)])
        ids, centers, rots, axes = _rigid_arrays(scene)
        for n in range(len(ids)):
            s = ray_ellipsoid_entry(tips, direction, centers[n], rots[n], axes[n] + inflate)
            k = int(np.argmin(s))
            if s[k] < best.travel:
                best = ObstructionHit(float(s[k]), tips[k] + s[k] * direction, "finger", int(ids[n]))
    return best


PAD_DIRECTIONS = 16


@dataclass(frozen=True)
class GraspPolygon:
    """Hull on the palm plane plus the mean fingertip depth."""

    hull: np.ndarray
    tip_depth: float
    pose: Pose

    def to_local(self, points) -> np.ndarray:
        return self.pose.inverse_transform(points)

    def margin(self, world_point) -> float:
        p = self.to_local(np.asarray(world_point)[None, :])[0]
        return signed_distance_to_polygon(p[:2], self.hull)

    def widened(self, amount: float) -> "GraspPolygon":
        c = self.hull.mean(axis=0)
        d = self.hull - c
        norms = np.linalg.norm(d, axis=1, keepdims=True)
        norms[norms == 0] = 1.0
        return GraspPolygon(self.hull + amount * d / norms, self.tip_depth, self.pose)


def grasp_polygon(state: gr.GripperState, config: gr.GripperConfig = gr.DEFAULT_GRIPPER,
                  whole_fingers: bool = False) -> GraspPolygon:
    """Fingertip hull seen along the tool axis, with the mean tip depth.

    ``whole_fingers`` takes the hull of the full finger lengths instead, which
    stays sensible when a finger curls past the axis, and pads it by half the
    finger width so the hull follows the finger pads rather than their centrelines.
    """
    pts = gr.finger_points(state, config)
    tips = pts[:, -1, :]
    if whole_fingers:
        a = np.linspace(0.0, 2.0 * math.pi, PAD_DIRECTIONS, endpoint=False)
        ring = config.contact_radius * np.stack([np.cos(a), np.sin(a)], axis=1)
        outline = (pts[:, :, None, :2] + ring[None, None]).reshape(-1, 2)
    else:
        outline = tips[:, :2]
    return GraspPolygon(convex_hull_2d(outline), float(tips[:, 2].mean()), state.base_pose)


def _opposed_pairs(fingers: set, state: gr.GripperState, config: gr.GripperConfig) -> bool:
    heading = gr.spread_headings(state.spread, config)
    return any(math.cos(heading[i] - heading[j]) < 0.0 for i in fingers for j in fingers if i < j)


def capture_set(gripper_state_closed: gr.GripperState, scene: Scene, contacts: Sequence[gr.Contact],
                config: gr.GripperConfig = gr.DEFAULT_GRIPPER,
                scene_config: SceneConfig = DEFAULT_SCENE) -> list[int]:
    """Ids of items held once the fingers have closed.

    The grasp holds anything only when two opposing fingers support it, each
    either touching an item or closed all the way. Candidates are items pinched
    between opposing fingers, plus items whose centre projects inside the
    finger hull and which either touch a finger or sit at least ``lift_margin``
    closer to the palm than the mean fingertip depth. Candidates fill the cage
    (hull area times tip depth, scaled by ``cage_fill``) from the most central
    outwards; whatever does not fit spills back into the crate.
    """
    touching: dict[int, set] = {}
    for c in contacts:
        if c.item_id is not None:
            touching.setdefault(c.item_id, set()).add(c.finger)
    support = set().union(*touching.values()) if touching else set()
    support |= {i for i, f in enumerate(gripper_state_closed.fingers)
                if f.flexion >= config.flexion_max - 1e-9}
    if not scene.items or not _opposed_pairs(support, gripper_state_closed, config):
        return []
    poly = grasp_polygon(gripper_state_closed, config, whole_fingers=True)
    local = poly.to_local(scene.arrays.centers)
    candidates = []
    for it, p in zip(scene.items, local):
        pinched = it.id in touching and _opposed_pairs(touching[it.id], gripper_state_closed, config)
        inside = p[2] >= 0.0 and signed_distance_to_polygon(p[:2], poly.hull) > 0.0
        if pinched or (inside and (it.id in touching or p[2] <= poly.tip_depth - scene_config.lift_margin)):
            candidates.append((float(np.hypot(p[0], p[1])), it))
    capacity = scene_config.cage_fill * polygon_area(poly.hull) * max(poly.tip_depth, 0.0)
    held, used = [], 0.0
    for _, it in sorted(candidates, key=lambda c: (c[0], c[1].id)):
        if held and used + it.volume > capacity:
            continue
        held.append(it.id)
        used += it.volume
    return sorted(held)


def tool_tilt(pose: Pose) -> float:
    """Angle (rad) between the tool axis and straight down."""
    axis = pose.rotation[:, 2]
    return math.acos(max(-1.0, min(1.0, -float(axis[2]))))


@dataclass(frozen=True)
class Retention:
    retained: tuple
    dropped_outside: tuple
    dropped_into_punnet: tuple = ()

    @property
    def placed(self) -> tuple:
        return tuple(sorted(self.retained + self.dropped_into_punnet))


def retention_check(captured: Sequence[Item], polygon: GraspPolygon, transport_path: Sequence[Pose],
                    seed: int, punnet_index: Optional[int] = None,
                    config: SceneConfig = DEFAULT_SCENE) -> Retention:
    """Which captured items survive the transport.

    The security margin of an item is its centre's distance inside the
    grasp polygon, less the projected-radius loss ``extent * (1 - cos(tilt))`` at each pose of the path
    and perturbed by a seeded per-item jitter. An item falls at the first pose
    where the margin drops below ``drop_threshold``; before ``punnet_index`` it
    lands outside the punnet.
    """
    if punnet_index is None:
        punnet_index = len(transport_path) - 1
    tilts = np.array([tool_tilt(p) for p in transport_path]) if len(transport_path) else np.zeros(1)
    rng = np.random.default_rng(seed)
    retained, outside, inside = [], [], []
    for it in sorted(captured, key=lambda i: i.id):
        jitter = float(rng.normal(0.0, config.retention_jitter)) if config.retention_jitter > 0 else 0.0
        base = polygon.margin(it.center) + jitter
        margins = base - it.extent * (1.0 - np.cos(tilts))
        low = np.nonzero(margins < config.drop_threshold)[0]
        if len(low) == 0:
            retained.append(it.id)
        elif low[0] < punnet_index:
            outside.append(it.id)
        else:
            inside.append(it.id)
    return Retention(tuple(retained), tuple(outside), tuple(inside))

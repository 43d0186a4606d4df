"""Small computational-geometry helpers shared by the gripper and scene models."""

from __future__ import annotations

import numpy as np


def inflated_ellipsoid_level(points, centers, rotations, semi_axes, inflate: float):
    """Normalised radius of every point in every (inflated) ellipsoid's frame.

    Returns an ``(n_items, n_points)`` array; values below 1 mean the point lies
    within ``inflate`` of the item (exact for spheres, an approximation for
    ellipsoids).
    """
    points = np.atleast_2d(points)
    if len(centers) == 0:
        return np.empty((0, len(points)))
    rel = points[None, :, :] - centers[:, None, :]
    q = np.matmul(rel, rotations) / (semi_axes[:, None, :] + inflate)
    return np.sqrt((q * q).sum(axis=2))


def ray_ellipsoid_entry(origins, direction, center, rotation, semi_axes):
    """Smallest non-negative travel ``s`` at which ``origin + s * direction`` enters
    the ellipsoid; ``inf`` when the ray misses. Origins already inside return 0.
    """
    origins = np.atleast_2d(origins)
    o = ((origins - center) @ rotation) / semi_axes
    d = (np.asarray(direction) @ rotation) / semi_axes
    a = d @ d
    b = 2.0 * (o @ d)
    c = np.einsum("ki,ki->k", o, o) - 1.0
    disc = b * b - 4.0 * a * c
    out = np.full(len(o), np.inf)
    inside = c <= 0.0
    out[inside] = 0.0
    hit = (~inside) & (disc >= 0.0)
    if np.any(hit):
        root = (-b[hit] - np.sqrt(disc[hit])) / (2.0 * a)
        root[root < 0.0] = np.inf
        out[hit] = root
    return out


def convex_hull_2d(points) -> np.ndarray:
    """Counter-clockwise hull vertices (Andrew's monotone chain)."""
    pts = sorted(map(tuple, np.asarray(points, dtype=float)))
    if len(pts) <= 2:
        return np.array(pts)

    def cross(o, a, b):
        return (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0])

    lower = []
    for p in pts:
        while len(lower) >= 2 and cross(lower[-2], lower[-1], p) <= 0:
            lower.pop()
        lower.append(p)
    upper = []
    for p in reversed(pts):
        while len(upper) >= 2 and cross(upper[-2], upper[-1], p) <= 0:
            upper.pop()
        upper.append(p)
    return np.array(lower[:-1] + upper[:-1])


def point_segment_distance(p, a, b) -> float:
    p, a, b = (np.asarray(v, dtype=float) for v in (p, a, b))
    ab = b - a
    denom = ab @ ab
    t = 0.0 if denom == 0.0 else float(np.clip((p - a) @ ab / denom, 0.0, 1.0))
    return float(np.linalg.norm(p - (a + t * ab)))


def signed_distance_to_polygon(point, hull) -> float:
    """Distance from ``point`` to the boundary of a convex CCW polygon, positive inside.

    Degenerate hulls (fewer than three vertices) have no interior, so every point
    gets a non-positive value.
    """
    point = np.asarray(point, dtype=float)
    hull = np.asarray(hull, dtype=float)
    n = len(hull)
    if n == 0:
        return -np.inf
    if n == 1:
        return -float(np.linalg.norm(point - hull[0]))
    a = hull
    b = np.roll(hull, -1, axis=0)
    ab = b - a
    ap = point[None, :] - a
    denom = (ab * ab).sum(axis=1)
    t = np.clip(np.divide((ap * ab).sum(axis=1), denom, out=np.zeros(n), where=denom > 0), 0.0, 1.0)
    d = float(np.sqrt(((ap - t[:, None] * ab) ** 2).sum(axis=1)).min())
    if n < 3:
        return -d
    side = ab[:, 0] * ap[:, 1] - ab[:, 1] * ap[:, 0]
    return -d if bool((side < 0).any()) else d


def polygon_area(hull) -> float:
    """Shoelace area of a simple polygon given as an ordered vertex list."""
    h = np.asarray(hull, dtype=float)
    if len(h) < 3:
        return 0.0
    x, y = h[:, 0], h[:, 1]
    return 0.5 * abs(float(np.dot(x, np.roll(y, -1)) - np.dot(y, np.roll(x, -1))))

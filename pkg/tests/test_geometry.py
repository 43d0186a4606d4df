import math

import numpy as np
from hypothesis import given, strategies as st
from scipy.spatial import ConvexHull

from multipick.geometry import (convex_hull_2d, inflated_ellipsoid_level, point_segment_distance,
                                polygon_area, ray_ellipsoid_entry, signed_distance_to_polygon)

SQUARE = np.array([[0, 0], [1, 0], [1, 1], [0, 1]], float)
clouds = st.lists(st.tuples(st.floats(-1, 1), st.floats(-1, 1)), min_size=5, max_size=40)


@given(clouds)
def test_hull_area_matches_qhull(points):
    pts = np.array(points)
    try:
        ref = ConvexHull(pts).volume
    except Exception:  # degenerate (collinear) clouds
        return
    assert math.isclose(polygon_area(convex_hull_2d(pts)), ref, rel_tol=1e-9, abs_tol=1e-12)


@given(clouds)
def test_hull_is_counter_clockwise_and_contains_points(points):
    pts = np.array(points)
    hull = convex_hull_2d(pts)
    if len(hull) < 3:
        return
    x, y = hull[:, 0], hull[:, 1]
    assert np.dot(x, np.roll(y, -1)) - np.dot(y, np.roll(x, -1)) > 0
    assert all(signed_distance_to_polygon(p, hull) >= -1e-9 for p in pts)


def test_signed_distance_square():
    assert signed_distance_to_polygon([0.5, 0.5], SQUARE) == 0.5
    assert math.isclose(signed_distance_to_polygon([0.5, 0.9], SQUARE), 0.1)
    assert signed_distance_to_polygon([2.0, 0.5], SQUARE) == -1.0
    assert signed_distance_to_polygon([0.0, 0.0], SQUARE[:2]) <= 0.0


def test_point_segment_distance():
    assert point_segment_distance([0, 1, 0], [-1, 0, 0], [1, 0, 0]) == 1.0
    assert point_segment_distance([3, 0, 0], [-1, 0, 0], [1, 0, 0]) == 2.0
    assert point_segment_distance([0, 2, 0], [0, 0, 0], [0, 0, 0]) == 2.0


def test_ray_sphere_entry():
    s = ray_ellipsoid_entry(np.array([[0, 0, 5.0], [3, 0, 5], [0, 0, 0.5]]), [0, 0, -1],
                            np.zeros(3), np.eye(3), np.ones(3))
    assert s[0] == 4.0 and math.isinf(s[1]) and s[2] == 0.0


def test_inflated_level_exact_for_spheres():
    level = inflated_ellipsoid_level(np.array([[0, 0, 3.0]]), np.zeros((1, 3)), np.eye(3)[None],
                                     np.full((1, 3), 2.0), 1.0)
    assert level.shape == (1, 1) and level[0, 0] == 1.0

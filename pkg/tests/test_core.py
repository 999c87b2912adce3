import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from geoleak.core import (EARTH_RADIUS_M, UNKNOWN, AddressLabel, EmptyInput, GeoPoint, GeotagKind, GridIndex,
                          PostRecord, geometric_midpoint, haversine_distance, normalize_address, offset_point)

lats = st.floats(-89.0, 89.0, allow_nan=False)
lons = st.floats(-179.0, 179.0, allow_nan=False)
points = st.builds(GeoPoint, lats, lons)


def test_one_degree_of_latitude_at_equator():
    assert haversine_distance(GeoPoint(0, 0), GeoPoint(1, 0)) == pytest.approx(2 * math.pi * EARTH_RADIUS_M / 360)
    assert haversine_distance(GeoPoint(0, 0), GeoPoint(1, 0)) == pytest.approx(111_195, abs=1)


def test_antipodes_half_circumference():
    assert haversine_distance(GeoPoint(0, 0), GeoPoint(0, 180)) == pytest.approx(20_015_087, abs=1)


def test_identical_points_zero():
    p = GeoPoint(48.1, 11.5)
    assert haversine_distance(p, p) == 0.0


@given(points, points)
def test_haversine_symmetric(a, b):
    assert haversine_distance(a, b) == pytest.approx(haversine_distance(b, a), rel=1e-12, abs=1e-9)


@given(points, points, points)
def test_triangle_inequality(a, b, c):
    ab, bc, ac = haversine_distance(a, b), haversine_distance(b, c), haversine_distance(a, c)
    assert ac <= (ab + bc) * (1 + 1e-6) + 1e-9


def test_midpoint_examples():
    assert geometric_midpoint([GeoPoint(10, 10)]) == GeoPoint(10, 10)
    m = geometric_midpoint([GeoPoint(0, 0), GeoPoint(0.001, 0.001)])
    assert (m.lat, m.lon) == pytest.approx((0.0005, 0.0005))
    m = geometric_midpoint([GeoPoint(1, 1), GeoPoint(1, 2), GeoPoint(1, 3)])
    assert (m.lat, m.lon) == pytest.approx((1, 2))
    with pytest.raises(EmptyInput):
        geometric_midpoint([])


@given(st.lists(points, min_size=1, max_size=12), st.randoms())
def test_midpoint_permutation_invariant(pts, rnd):
    shuffled = list(pts)
    rnd.shuffle(shuffled)
    a, b = geometric_midpoint(pts), geometric_midpoint(shuffled)
    assert a.lat == pytest.approx(b.lat, abs=1e-9)
    assert a.lon == pytest.approx(b.lon, abs=1e-9)


@pytest.mark.parametrize("lat,lon", [(91, 0), (0, 181), (float("nan"), 0)])
def test_geopoint_rejects_out_of_range(lat, lon):
    with pytest.raises(ValueError):
        GeoPoint(lat, lon)


def test_offset_point_distance():
    p = GeoPoint(41.88, -87.63)
    assert haversine_distance(p, offset_point(p, 30, 0)) == pytest.approx(30, rel=1e-4)
    assert haversine_distance(p, offset_point(p, 0, 30)) == pytest.approx(30, rel=1e-4)


def test_address_normalization():
    assert normalize_address("  12  Oak   ST ") == normalize_address("12 oak st")
    assert AddressLabel(" 12 Oak St ") == AddressLabel("12 oak st")
    assert not UNKNOWN.resolved
    assert AddressLabel("1 Main St").resolved


def test_post_record_geotag_consistency():
    with pytest.raises(ValueError):
        PostRecord("p", "u", 10, None, geotag_kind=GeotagKind.GPS)
    with pytest.raises(ValueError):
        PostRecord("p", "u", 10, GeoPoint(0, 0), geotag_kind=GeotagKind.NONE)
    PostRecord("p", "u", 10, None, geotag_kind=GeotagKind.COARSE)


@given(st.lists(st.tuples(st.floats(-300, 300), st.floats(-300, 300)), max_size=60),
       st.tuples(st.floats(-300, 300), st.floats(-300, 300)),
       st.floats(0.5, 80), st.sampled_from([-60.0, 0.0, 41.9, 70.0]))
def test_grid_index_matches_brute_force(offsets, q, radius, lat0):
    origin = GeoPoint(lat0, 10.0)
    idx = GridIndex(cell_m=radius * 1.25)
    pts = [offset_point(origin, n, e) for n, e in offsets]
    for i, p in enumerate(pts):
        idx.insert(p, i)
    qp = offset_point(origin, *q)
    got = [item for _, _, item in idx.within(qp, radius)]
    expected = sorted((haversine_distance(qp, p), i) for i, p in enumerate(pts) if haversine_distance(qp, p) <= radius)
    assert got == [i for _, i in expected]


def test_grid_index_rejects_nonpositive_cell():
    with pytest.raises(ValueError):
        GridIndex(0)


def test_numpy_and_scalar_haversine_agree():
    from oracles import np_haversine_matrix
    rng = np.random.default_rng(0)
    lat = rng.uniform(-60, 60, 20)
    lon = rng.uniform(-170, 170, 20)
    d = np_haversine_matrix(lat, lon)
    for i in range(20):
        for j in range(20):
            assert d[i, j] == pytest.approx(haversine_distance(GeoPoint(lat[i], lon[i]), GeoPoint(lat[j], lon[j])),
                                            rel=1e-9, abs=1e-6)

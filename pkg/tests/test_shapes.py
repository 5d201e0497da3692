import numpy as np
import pytest
from shapely.geometry import Point, Polygon

from swarmshape import (
    SamplePointSet,
    ShapeFileError,
    ShapePose,
    discretize_polygon,
    load_points,
    points_in_polygon,
    save_points,
    to_world,
    transform_points,
    validate_density,
)

UNIT_SQUARE = [(0.0, 0.0), (1.0, 0.0), (1.0, 1.0), (0.0, 1.0)]


def brute_force_grid_points(vertices, d_pts):
    """Independent oracle: enumerate grid cells, keep centers covered by the polygon."""
    poly = Polygon(vertices)
    lo = np.min(vertices, axis=0)
    hi = np.max(vertices, axis=0)
    out = []
    b = 0
    while lo[1] + (b + 0.5) * d_pts <= hi[1] + d_pts:
        a = 0
        while lo[0] + (a + 0.5) * d_pts <= hi[0] + d_pts:
            c = (lo[0] + (a + 0.5) * d_pts, lo[1] + (b + 0.5) * d_pts)
            if poly.covers(Point(c)):
                out.append(c)
            a += 1
        b += 1
    return np.array(out)


class TestDiscretizePolygon:
    def test_unit_square_half_pitch(self):
        s = discretize_polygon(UNIT_SQUARE, 0.5)
        expected = {(0.25, 0.25), (0.75, 0.25), (0.25, 0.75), (0.75, 0.75)}
        assert s.m == 4
        assert {tuple(p) for p in s.points_local} == expected

    def test_tiny_triangle_no_cell_center(self):
        tri = [(0.0, 0.0), (0.05, 0.0), (0.0, 0.05)]
        with pytest.raises(ValueError, match="zero resulting points"):
            discretize_polygon(tri, 1.0)

    def test_square_side_ten_pitches(self):
        s = discretize_polygon([(0, 0), (10, 0), (10, 10), (0, 10)], 1.0)
        assert s.m == 100
        assert np.allclose(s.center, [5.0, 5.0])

    def test_matches_brute_force_oracle_on_random_polygons(self):
        rng = np.random.default_rng(42)
        for _ in range(20):
            # random convex polygon: hull of random points
            raw = rng.uniform(-3, 3, size=(8, 2))
            hull = Polygon(raw.tolist()).convex_hull
            verts = np.array(hull.exterior.coords)[:-1]
            d_pts = rng.uniform(0.3, 1.0)
            expected = brute_force_grid_points(verts, d_pts)
            if expected.shape[0] == 0:
                continue
            s = discretize_polygon(verts, d_pts)
            got = {tuple(np.round(p, 9)) for p in s.points_local}
            want = {tuple(np.round(p, 9)) for p in expected}
            assert got == want

    def test_all_outputs_inside_polygon(self):
        tri = [(0.0, 0.0), (7.0, 1.0), (3.0, 6.0)]
        s = discretize_polygon(tri, 0.4)
        poly = Polygon(tri)
        for p in s.points_local:
            # boundary points count as inside; allow epsilon for exact-on-edge
            assert poly.distance(Point(p)) <= 1e-9
        assert np.all(points_in_polygon(s.points_local, np.array(tri)))

    def test_degenerate_polygon_rejected(self):
        with pytest.raises(ValueError, match="degenerate"):
            discretize_polygon([(0, 0), (1, 1), (2, 2)], 0.5)

    def test_self_intersecting_rejected(self):
        bow = [(0, 0), (1, 1), (1, 0), (0, 1)]
        with pytest.raises(ValueError, match="self-intersecting"):
            discretize_polygon(bow, 0.25)

    def test_too_few_vertices(self):
        with pytest.raises(ValueError):
            discretize_polygon([(0, 0), (1, 0)], 0.5)


class TestLoadPoints:
    def test_two_point_file(self, tmp_path):
        f = tmp_path / "pts.txt"
        f.write_text("0,0\n1,0\n")
        s = load_points(f)
        assert s.m == 2
        assert s.d_pts == 1.0
        assert np.allclose(s.center, [0.5, 0.0])

    def test_malformed_row_names_line(self, tmp_path):
        f = tmp_path / "bad.txt"
        f.write_text("a,b\n")
        with pytest.raises(ShapeFileError, match="line 1"):
            load_points(f)

    def test_empty_file(self, tmp_path):
        f = tmp_path / "empty.txt"
        f.write_text("")
        with pytest.raises(ShapeFileError, match="m = 0"):
            load_points(f)

    def test_comments_and_blanks_skipped(self, tmp_path):
        f = tmp_path / "pts.txt"
        f.write_text("# header\n\n0.5,0.5\n# more\n1.5,0.5\n")
        assert load_points(f).m == 2

    def test_nonfinite_coordinate(self, tmp_path):
        f = tmp_path / "pts.txt"
        f.write_text("0,0\nnan,1\n")
        with pytest.raises(ShapeFileError, match="line 2"):
            load_points(f)

    def test_inconsistent_dimension(self, tmp_path):
        f = tmp_path / "pts.txt"
        f.write_text("0,0\n1,2,3\n")
        with pytest.raises(ShapeFileError, match="line 2"):
            load_points(f)

    def test_duplicate_points_rejected(self, tmp_path):
        f = tmp_path / "pts.txt"
        f.write_text("1,1\n1,1\n")
        with pytest.raises(ShapeFileError, match="duplicate"):
            load_points(f)

    def test_roundtrip_through_save(self, tmp_path):
        rng = np.random.default_rng(3)
        s = SamplePointSet.from_points(rng.uniform(-5, 5, size=(9, 2)))
        f = tmp_path / "rt.txt"
        save_points(s, f)
        back = load_points(f)
        assert np.array_equal(back.points_local, s.points_local)

    def test_single_column_gives_d1(self, tmp_path):
        f = tmp_path / "pts.txt"
        f.write_text("0.5\n2.5\n")
        s = load_points(f)
        assert s.dim == 1
        assert s.d_pts == 2.0


class TestToWorld:
    def test_identity_pose_reproduces_local_points(self, unit_square_set):
        s = unit_square_set
        anchor = s.points_local[s.anchor_index]
        w = to_world(s, ShapePose(position=anchor, orientation=0.0))
        # dyadic coordinates: the round trip is exact
        assert np.array_equal(w.points, s.points_local)

    def test_single_point_maps_to_pose_position(self):
        s = SamplePointSet.from_points([[0.0, 0.0]])
        w = to_world(s, ShapePose(position=np.array([3.0, 4.0]), orientation=np.pi))
        assert np.allclose(w.points, [[3.0, 4.0]], atol=1e-12)

    def test_quarter_turn_two_points(self):
        s = SamplePointSet.from_points([[0.0, 0.0], [1.0, 0.0]], d_pts=1.0)
        assert s.anchor_index == 0  # tie with point 1 broken by lowest index
        w = to_world(s, ShapePose(position=np.array([0.0, 0.0]), orientation=np.pi / 2))
        assert np.allclose(w.points, [[0.0, 0.0], [0.0, 1.0]], atol=1e-12)

    def test_isometry_on_random_sets(self):
        rng = np.random.default_rng(11)
        for _ in range(20):
            pts = rng.uniform(-4, 4, size=(12, 2))
            s = SamplePointSet.from_points(pts)
            pose = ShapePose(position=rng.uniform(-9, 9, size=2), orientation=rng.uniform(-7, 7))
            w = to_world(s, pose)
            before = np.linalg.norm(pts[:, None] - pts[None, :], axis=-1)
            after = np.linalg.norm(w.points[:, None] - w.points[None, :], axis=-1)
            assert np.allclose(after, before, rtol=1e-12, atol=1e-12)

    def test_anchor_lands_exactly_on_pose_position(self):
        rng = np.random.default_rng(12)
        for _ in range(10):
            s = SamplePointSet.from_points(rng.uniform(-2, 2, size=(7, 2)))
            q_o = rng.uniform(-5, 5, size=2)
            w = to_world(s, ShapePose(position=q_o, orientation=rng.uniform(0, 6)))
            assert np.array_equal(w.points[s.anchor_index], q_o)

    def test_d3_translation_only(self):
        pts = np.array([[0.0, 0.0, 0.0], [1.0, 2.0, 3.0]])
        s = SamplePointSet.from_points(pts)
        w = to_world(s, ShapePose(position=np.array([1.0, 1.0, 1.0]), orientation=2.0))
        anchor = pts[s.anchor_index]
        assert np.allclose(w.points, pts - anchor + np.array([1.0, 1.0, 1.0]))

    def test_transform_points_matches_to_world_on_samples(self, unit_square_set):
        pose = ShapePose(position=np.array([2.0, -1.0]), orientation=0.7)
        w = to_world(unit_square_set, pose)
        again = transform_points(unit_square_set.points_local, unit_square_set, pose)
        assert np.array_equal(w.points, again)


class TestValidateDensity:
    def test_reference_numbers(self):
        s = SamplePointSet.from_points(np.random.default_rng(0).uniform(0, 10, (100, 2)), d_pts=1.0)
        rep = validate_density(s, n=20, r_avoid=1.0)
        assert rep.points_ok  # 100 >= 100
        assert rep.spacing_bound == pytest.approx(0.79266546, abs=1e-6)
        assert rep.spacing_ok
        assert rep.ok

    def test_too_few_points_flagged(self):
        s = SamplePointSet.from_points(np.random.default_rng(1).uniform(0, 3, (10, 2)), d_pts=1.0)
        rep = validate_density(s, n=20, r_avoid=1.0)
        assert not rep.points_ok
        assert rep.min_points == 100

    def test_zero_avoid_radius_spacing_always_ok(self):
        s = SamplePointSet.from_points(np.random.default_rng(2).uniform(0, 3, (6, 2)), d_pts=0.01)
        rep = validate_density(s, n=50, r_avoid=0.0)
        assert rep.spacing_ok

    def test_never_raises_on_failure(self):
        s = SamplePointSet.from_points([[0.0, 0.0], [0.1, 0.0]], d_pts=0.1)
        rep = validate_density(s, n=99, r_avoid=5.0)
        assert not rep.ok


class TestSamplePointSet:
    def test_anchor_is_argmin_to_center(self):
        rng = np.random.default_rng(5)
        for _ in range(10):
            pts = rng.uniform(-3, 3, size=(9, 2))
            s = SamplePointSet.from_points(pts)
            d = np.linalg.norm(pts - pts.mean(axis=0), axis=1)
            assert s.anchor_index == int(np.argmin(d))

    def test_rejects_nonfinite(self):
        with pytest.raises(ValueError):
            SamplePointSet.from_points([[np.inf, 0.0]])

    def test_rejects_bad_spacing(self):
        with pytest.raises(ValueError):
            SamplePointSet.from_points([[0.0, 0.0]], d_pts=-1.0)

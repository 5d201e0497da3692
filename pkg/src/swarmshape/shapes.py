"""Discrete shape models: sample-point sets, poses, and world-frame placement.

A desired shape is represented by a finite set of sample points obtained
from a uniform grid discretization (or loaded from a file). A pose places
the local point set in the world frame, anchored at the sample point
closest to the shape center.
"""
from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import ShapeFileError


@dataclass(frozen=True)
class SamplePointSet:
    """Local-frame sample points of a desired shape.

    points_local : (m, d) array, meters
    d_pts        : nominal inter-point spacing of the discretization, meters
    center       : (d,) centroid of points_local
    anchor_index : index of the point nearest to center (lowest index on ties)
    """

    points_local: np.ndarray
    d_pts: float
    center: np.ndarray
    anchor_index: int

    @property
    def m(self) -> int:
        return self.points_local.shape[0]

    @property
    def dim(self) -> int:
        return self.points_local.shape[1]

    @classmethod
    def from_points(cls, points, d_pts: float | None = None) -> "SamplePointSet":
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        if pts.shape[0] < 1:
            raise ValueError("sample set needs at least one point (m = 0)")
        if not np.all(np.isfinite(pts)):
            raise ValueError("sample points must be finite")
        if d_pts is None:
            d_pts = _min_pairwise_distance(pts)
            if d_pts == 0.0:
                raise ValueError("duplicate sample points: minimum pairwise distance is 0")
            if not np.isfinite(d_pts):  # single point, no pairs
                d_pts = 1.0
        if not (d_pts > 0.0 and np.isfinite(d_pts)):
            raise ValueError(f"d_pts must be positive and finite, got {d_pts}")
        center = pts.mean(axis=0)
        anchor = int(np.argmin(np.linalg.norm(pts - center, axis=1)))
        return cls(points_local=pts, d_pts=float(d_pts), center=center, anchor_index=anchor)


@dataclass(frozen=True)
class ShapePose:
    """World position of the shape anchor and its rotation (radians, 2-D only)."""

    position: np.ndarray
    orientation: float = 0.0

    def __post_init__(self):
        pos = np.asarray(self.position, dtype=float).reshape(-1)
        object.__setattr__(self, "position", pos)
        if not (np.all(np.isfinite(pos)) and np.isfinite(self.orientation)):
            raise ValueError("pose must be finite")


@dataclass(frozen=True)
class WorldSampleSet:
    """Sample points placed in the world frame, with their provenance."""

    points: np.ndarray  # (m, d)
    source: SamplePointSet
    pose: ShapePose

    @property
    def m(self) -> int:
        return self.points.shape[0]

    @property
    def dim(self) -> int:
        return self.points.shape[1]


@dataclass(frozen=True)
class DensityReport:
    """Advisory check of sample density against a swarm size."""

    m: int
    n: int
    d_pts: float
    r_avoid: float
    points_ok: bool       # m >= 5 n
    min_points: int       # 5 n
    spacing_ok: bool      # d_pts >= sqrt(pi n / m) * r_avoid
    spacing_bound: float  # sqrt(pi n / m) * r_avoid

    @property
    def ok(self) -> bool:
        return self.points_ok and self.spacing_ok


def _min_pairwise_distance(pts: np.ndarray) -> float:
    if pts.shape[0] < 2:
        return np.inf
    diff = pts[:, None, :] - pts[None, :, :]
    d2 = (diff * diff).sum(axis=-1)
    iu = np.triu_indices(pts.shape[0], k=1)
    return float(np.sqrt(d2[iu].min()))


def _polygon_area(vertices: np.ndarray) -> float:
    x, y = vertices[:, 0], vertices[:, 1]
    return 0.5 * float(np.sum(x * np.roll(y, -1) - np.roll(x, -1) * y))


def _segments_properly_intersect(p1, p2, q1, q2) -> bool:
    def orient(a, b, c):
        v = (b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0])
        return 0 if v == 0 else (1 if v > 0 else -1)

    o1, o2 = orient(p1, p2, q1), orient(p1, p2, q2)
    o3, o4 = orient(q1, q2, p1), orient(q1, q2, p2)
    return o1 != o2 and o3 != o4 and 0 not in (o1, o2, o3, o4)


def _check_simple(vertices: np.ndarray) -> None:
    k = vertices.shape[0]
    for i in range(k):
        a1, a2 = vertices[i], vertices[(i + 1) % k]
        for j in range(i + 1, k):
            if j == i or (j + 1) % k == i or (i + 1) % k == j:
                continue  # adjacent edges share a vertex
            b1, b2 = vertices[j], vertices[(j + 1) % k]
            if _segments_properly_intersect(a1, a2, b1, b2):
                raise ValueError("polygon is self-intersecting")


def points_in_polygon(points: np.ndarray, vertices: np.ndarray) -> np.ndarray:
    """Inclusive point-in-polygon test (boundary points count as inside).

    Even-odd ray crossing plus an explicit on-edge check, vectorized over
    points. `points` is (p, 2), `vertices` is (k, 2) in order.
    """
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    verts = np.asarray(vertices, dtype=float)
    k = verts.shape[0]
    x, y = pts[:, 0], pts[:, 1]
    inside = np.zeros(pts.shape[0], dtype=bool)
    on_edge = np.zeros(pts.shape[0], dtype=bool)
    scale = max(1.0, float(np.abs(verts).max()))
    tol = 1e-12 * scale
    for i in range(k):
        x1, y1 = verts[i]
        x2, y2 = verts[(i + 1) % k]
        if y1 != y2:
            straddles = (y1 > y) != (y2 > y)
            x_int = x1 + (y - y1) * (x2 - x1) / (y2 - y1)
            inside ^= straddles & (x < x_int)
        # on-segment: zero cross product and within the segment's bounding box
        cross = (x2 - x1) * (y - y1) - (y2 - y1) * (x - x1)
        seg = max(np.hypot(x2 - x1, y2 - y1), tol)
        on_edge |= (
            (np.abs(cross) <= tol * seg)
            & (x >= min(x1, x2) - tol)
            & (x <= max(x1, x2) + tol)
            & (y >= min(y1, y2) - tol)
            & (y <= max(y1, y2) + tol)
        )
    return inside | on_edge


def discretize_polygon(vertices, d_pts: float) -> SamplePointSet:
    """Sample a simple polygon on a square grid of pitch d_pts.

    The grid is anchored at the polygon bounding-box minimum; a grid cell
    contributes its center whenever that center lies inside or on the
    polygon. Raises on degenerate (zero-area) polygons and when no cell
    center falls inside.
    """
    verts = np.asarray(vertices, dtype=float)
    if verts.ndim != 2 or verts.shape[1] != 2 or verts.shape[0] < 3:
        raise ValueError("polygon needs at least 3 two-dimensional vertices")
    if not np.all(np.isfinite(verts)):
        raise ValueError("polygon vertices must be finite")
    if not (d_pts > 0.0 and np.isfinite(d_pts)):
        raise ValueError(f"d_pts must be positive and finite, got {d_pts}")
    scale = max(1.0, float(np.abs(verts).max()))
    _check_simple(verts)
    if abs(_polygon_area(verts)) <= 1e-12 * scale * scale:
        raise ValueError("degenerate polygon (zero area)")

    lo = verts.min(axis=0)
    hi = verts.max(axis=0)
    nx = int(np.floor((hi[0] - lo[0]) / d_pts)) + 1
    ny = int(np.floor((hi[1] - lo[1]) / d_pts)) + 1
    ax = lo[0] + (np.arange(nx) + 0.5) * d_pts
    ay = lo[1] + (np.arange(ny) + 0.5) * d_pts
    gx, gy = np.meshgrid(ax, ay)  # row-major: y outer, x inner
    centers = np.column_stack([gx.ravel(), gy.ravel()])
    keep = points_in_polygon(centers, verts)
    pts = centers[keep]
    if pts.shape[0] == 0:
        raise ValueError("zero resulting points: no grid cell center lies in the polygon")
    return SamplePointSet.from_points(pts, d_pts=d_pts)


def load_points(path) -> SamplePointSet:
    """Read a sample-point file: one comma-separated point per line, '#' comments.

    The coordinate count of the first data row fixes the dimension; d_pts is
    set to the minimum pairwise distance among the points (1.0 for a single
    point).
    """
    path = Path(path)
    rows = []
    dim = None
    for lineno, raw in enumerate(path.read_text().splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        fields = line.split(",")
        try:
            coords = [float(f) for f in fields]
        except ValueError:
            raise ShapeFileError(f"{path}: line {lineno}: could not parse {line!r} as coordinates")
        if any(not np.isfinite(c) for c in coords):
            raise ShapeFileError(f"{path}: line {lineno}: non-finite coordinate in {line!r}")
        if dim is None:
            dim = len(coords)
        elif len(coords) != dim:
            raise ShapeFileError(
                f"{path}: line {lineno}: expected {dim} coordinates, got {len(coords)}"
            )
        rows.append(coords)
    if not rows:
        raise ShapeFileError(f"{path}: no sample points (m = 0)")
    pts = np.asarray(rows, dtype=float)
    if pts.shape[0] >= 2 and _min_pairwise_distance(pts) == 0.0:
        raise ShapeFileError(f"{path}: duplicate points give zero inter-point distance")
    return SamplePointSet.from_points(pts)


def save_points(sample_set: SamplePointSet, path) -> None:
    """Write a sample-point file readable by load_points."""
    lines = [",".join(format(c, ".17g") for c in p) for p in sample_set.points_local]
    Path(path).write_text("\n".join(lines) + "\n")


def rotation_matrix(theta: float) -> np.ndarray:
    c, s = np.cos(theta), np.sin(theta)
    return np.array([[c, -s], [s, c]])


def transform_points(points: np.ndarray, sample_set: SamplePointSet, pose: ShapePose) -> np.ndarray:
    """Map local-frame points into the world frame of the posed shape.

    Points are expressed relative to the anchor sample point; for d = 2 they
    are rotated by the pose orientation, then translated so the anchor lands
    exactly on the pose position. For d != 2 only the translation applies.
    """
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    anchor = sample_set.points_local[sample_set.anchor_index]
    rel = pts - anchor
    if sample_set.dim == 2:
        rel = rel @ rotation_matrix(pose.orientation).T
    return rel + pose.position


def to_world(sample_set: SamplePointSet, pose: ShapePose) -> WorldSampleSet:
    """Place a sample set in the world frame at the given pose."""
    if pose.position.shape[0] != sample_set.dim:
        raise ValueError("pose dimension does not match sample set")
    world = transform_points(sample_set.points_local, sample_set, pose)
    return WorldSampleSet(points=world, source=sample_set, pose=pose)


def validate_density(sample_set: SamplePointSet, n: int, r_avoid: float) -> DensityReport:
    """Advisory density checks for a swarm of n robots (never raises on failure)."""
    if n < 1:
        raise ValueError("n must be >= 1")
    m = sample_set.m
    bound = float(np.sqrt(np.pi * n / m) * r_avoid)
    return DensityReport(
        m=m,
        n=n,
        d_pts=sample_set.d_pts,
        r_avoid=float(r_avoid),
        points_ok=m >= 5 * n,
        min_points=5 * n,
        spacing_ok=sample_set.d_pts >= bound,
        spacing_bound=bound,
    )

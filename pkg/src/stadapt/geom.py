"""
Windows, point patterns and voxel grids.

A spatio-temporal pattern lives in ``W x T`` where ``W`` is a simple polygon
and ``T = [t0, t1]``.  Estimation happens on a regular voxel grid over the
bounding box of ``W`` crossed with ``T``.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "SpatialWindow",
    "TimeInterval",
    "PointPattern",
    "Grid3D",
    "BinnedWeights",
    "points_in_polygon",
    "point_in_window",
    "make_grid",
    "bin_points",
    "voxel_index",
]


def _segments_intersect(p1, p2, q1, q2):
    def orient(a, b, c):
        v = (b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0])
        return 0 if abs(v) < 1e-15 else (1 if v > 0 else -1)

    def on_seg(a, b, c):
        return (min(a[0], b[0]) <= c[0] <= max(a[0], b[0])
                and min(a[1], b[1]) <= c[1] <= max(a[1], b[1]))

    o1, o2 = orient(p1, p2, q1), orient(p1, p2, q2)
    o3, o4 = orient(q1, q2, p1), orient(q1, q2, p2)
    if o1 != o2 and o3 != o4:
        return True
    return ((o1 == 0 and on_seg(p1, p2, q1)) or (o2 == 0 and on_seg(p1, p2, q2))
            or (o3 == 0 and on_seg(q1, q2, p1)) or (o4 == 0 and on_seg(q1, q2, p2)))


def _is_simple(vertices):
    n = len(vertices)
    for i in range(n):
        a1, a2 = vertices[i], vertices[(i + 1) % n]
        for j in range(i + 1, n):
            # adjacent edges share a vertex by construction
            if j == i or (j + 1) % n == i or (i + 1) % n == j:
                continue
            if _segments_intersect(a1, a2, vertices[j], vertices[(j + 1) % n]):
                return False
    return True


@dataclass(frozen=True, eq=False)
class SpatialWindow:
    """Simple polygon in planar units.

    Parameters
    ----------
    vertices : array_like, shape (k, 2)
        Polygon vertices in order.  A closing vertex equal to the first one
        is dropped.
    """

    vertices: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.vertices, dtype=float)
        if v.ndim != 2 or v.shape[1] != 2:
            raise ValueError("window vertices must have shape (k, 2)")
        if len(v) > 3 and np.array_equal(v[0], v[-1]):
            v = v[:-1]
        if len(v) < 3:
            raise ValueError("window needs at least 3 vertices")
        if not np.all(np.isfinite(v)):
            raise ValueError("window vertices must be finite")
        v.setflags(write=False)
        object.__setattr__(self, "vertices", v)
        if not self.area > 0:
            raise ValueError("degenerate window: polygon area is zero")
        if not _is_simple(v):
            raise ValueError("window polygon is self-intersecting")

    @classmethod
    def rectangle(cls, x0=0.0, y0=0.0, x1=1.0, y1=1.0):
        return cls(np.array([[x0, y0], [x1, y0], [x1, y1], [x0, y1]], dtype=float))

    @property
    def area(self) -> float:
        x, y = self.vertices[:, 0], self.vertices[:, 1]
        return 0.5 * abs(np.dot(x, np.roll(y, -1)) - np.dot(np.roll(x, -1), y))

    @property
    def bbox(self) -> tuple[float, float, float, float]:
        """``(xmin, ymin, xmax, ymax)``."""
        lo = self.vertices.min(axis=0)
        hi = self.vertices.max(axis=0)
        return float(lo[0]), float(lo[1]), float(hi[0]), float(hi[1])

    def contains(self, x, y) -> np.ndarray:
        return points_in_polygon(x, y, self.vertices)

    def __eq__(self, other):
        if not isinstance(other, SpatialWindow):
            return NotImplemented
        return np.array_equal(self.vertices, other.vertices)

    __hash__ = None


@dataclass(frozen=True)
class TimeInterval:
    t0: float
    t1: float

    def __post_init__(self):
        if not (np.isfinite(self.t0) and np.isfinite(self.t1)):
            raise ValueError("time interval bounds must be finite")
        if not self.t1 > self.t0:
            raise ValueError(f"empty time interval [{self.t0}, {self.t1}]")

    @property
    def length(self) -> float:
        return self.t1 - self.t0

    def contains(self, t) -> np.ndarray:
        t = np.asarray(t, dtype=float)
        return (t >= self.t0) & (t <= self.t1)


def points_in_polygon(x, y, vertices, tol=1e-12) -> np.ndarray:
    """Vectorised even-odd test; points on an edge count as inside."""
    x = np.atleast_1d(np.asarray(x, dtype=float))
    y = np.atleast_1d(np.asarray(y, dtype=float))
    v = np.asarray(vertices, dtype=float)
    xa, ya = v[:, 0], v[:, 1]
    xb, yb = np.roll(xa, -1), np.roll(ya, -1)

    inside = np.zeros(x.shape, dtype=bool)
    boundary = np.zeros(x.shape, dtype=bool)
    scale = max(np.ptp(xa), np.ptp(ya), 1.0)
    for x1, y1, x2, y2 in zip(xa, ya, xb, yb):
        dx, dy = x2 - x1, y2 - y1
        seg2 = dx * dx + dy * dy
        cross = (x - x1) * dy - (y - y1) * dx
        dot = (x - x1) * dx + (y - y1) * dy
        boundary |= (np.abs(cross) <= tol * scale * np.sqrt(seg2)) & (dot >= -tol) & (dot <= seg2 + tol)
        straddle = (y1 > y) != (y2 > y)
        with np.errstate(divide="ignore", invalid="ignore"):
            xcross = x1 + (y - y1) * dx / dy
        inside ^= straddle & (x < xcross)
    return inside | boundary


def point_in_window(p, window: SpatialWindow) -> bool:
    return bool(points_in_polygon(p[0], p[1], window.vertices)[0])


@dataclass(frozen=True, eq=False)
class PointPattern:
    """Events ``(x, y, t)`` observed in ``window x interval``.

    Construction validates that every event lies in the window (boundary
    included) and in the closed time interval.
    """

    xyt: np.ndarray
    window: SpatialWindow
    interval: TimeInterval

    def __post_init__(self):
        xyt = np.asarray(self.xyt, dtype=float).reshape(-1, 3)
        if not np.all(np.isfinite(xyt)):
            raise ValueError("point coordinates must be finite")
        ok = self.window.contains(xyt[:, 0], xyt[:, 1]) & self.interval.contains(xyt[:, 2])
        if xyt.shape[0] and not ok.all():
            bad = np.flatnonzero(~ok)
            raise ValueError(f"{bad.size} point(s) outside W x T, first at index {bad[0]}")
        xyt = xyt.copy()
        xyt.setflags(write=False)
        object.__setattr__(self, "xyt", xyt)

    @property
    def n(self) -> int:
        return self.xyt.shape[0]

    @property
    def x(self):
        return self.xyt[:, 0]

    @property
    def y(self):
        return self.xyt[:, 1]

    @property
    def t(self):
        return self.xyt[:, 2]

    @property
    def volume(self) -> float:
        return self.window.area * self.interval.length

    def subset(self, index) -> "PointPattern":
        return PointPattern(self.xyt[index], self.window, self.interval)


@dataclass(frozen=True, eq=False)
class Grid3D:
    """Regular voxelisation of the box enclosing ``W x T``.

    ``origin`` is the lowest corner; voxel ``(i, j, k)`` has centroid
    ``origin + (idx + 0.5) * spacing``.
    """

    shape: tuple[int, int, int]
    spacing: tuple[float, float, float]
    origin: tuple[float, float, float]
    window: SpatialWindow
    interval: TimeInterval
    inside: np.ndarray = field(repr=False)

    @property
    def volume(self) -> float:
        m1, m2, m3 = self.spacing
        return m1 * m2 * m3

    def axis_centers(self, axis: int) -> np.ndarray:
        return self.origin[axis] + (np.arange(self.shape[axis]) + 0.5) * self.spacing[axis]

    def centers(self):
        return tuple(self.axis_centers(a) for a in range(3))

    @property
    def spatial_inside(self) -> np.ndarray:
        """2D mask of centroids inside ``W``."""
        # temporal centroids always fall inside [t0, t1]
        return self.inside[:, :, 0]

    @property
    def temporal_inside(self) -> np.ndarray:
        return self.interval.contains(self.axis_centers(2))

    def _spatial_mask(self):
        cx, cy = self.axis_centers(0), self.axis_centers(1)
        X, Y = np.meshgrid(cx, cy, indexing="ij")
        return self.window.contains(X.ravel(), Y.ravel()).reshape(X.shape)

    def mask_hash(self) -> str:
        import hashlib

        return hashlib.sha256(np.packbits(self.inside.ravel()).tobytes()).hexdigest()

    def __eq__(self, other):
        if not isinstance(other, Grid3D):
            return NotImplemented
        return (self.shape == other.shape and self.spacing == other.spacing
                and self.origin == other.origin and np.array_equal(self.inside, other.inside))

    __hash__ = None


def make_grid(window: SpatialWindow, interval: TimeInterval, M1: int, M2: int, M3: int) -> Grid3D:
    """Voxel grid of ``M1 x M2 x M3`` cells on ``bbox(W) x [t0, t1]``."""
    dims = (int(M1), int(M2), int(M3))
    if min(dims) < 2:
        raise ValueError(f"grid needs at least 2 voxels per axis, got {dims}")
    xmin, ymin, xmax, ymax = window.bbox
    spacing = ((xmax - xmin) / dims[0], (ymax - ymin) / dims[1], interval.length / dims[2])
    origin = (xmin, ymin, interval.t0)
    grid = Grid3D(dims, spacing, origin, window, interval, np.zeros(0, bool))
    smask = grid._spatial_mask()
    inside = smask[:, :, None] & grid.temporal_inside[None, None, :]
    inside.setflags(write=False)
    object.__setattr__(grid, "inside", inside)
    return grid


def voxel_index(grid: Grid3D, xyt) -> np.ndarray:
    """Voxel index of each point, ties on voxel faces going to the lower index.

    Raises ``ValueError`` naming the first point outside the grid extent.
    """
    xyt = np.asarray(xyt, dtype=float).reshape(-1, 3)
    idx = np.empty(xyt.shape, dtype=np.int64)
    bad = np.zeros(xyt.shape[0], dtype=bool)
    for a in range(3):
        m, o, M = grid.spacing[a], grid.origin[a], grid.shape[a]
        u = (xyt[:, a] - o) / m
        slack = 1e-9
        bad |= (u < -slack) | (u > M + slack)
        idx[:, a] = np.clip(np.ceil(u) - 1, 0, M - 1)
    if bad.any():
        i = int(np.flatnonzero(bad)[0])
        raise ValueError(f"point {i} at {tuple(xyt[i])} lies outside the grid extent")
    return idx


@dataclass(frozen=True, eq=False)
class BinnedWeights:
    grid: Grid3D
    w: np.ndarray

    @property
    def n(self) -> int:
        return int(round(self.w.sum()))


def bin_points(pattern: PointPattern, grid: Grid3D) -> BinnedWeights:
    """Simple binning: each event adds unit mass to the voxel containing it."""
    w = np.zeros(grid.shape, dtype=float)
    if pattern.n:
        idx = voxel_index(grid, pattern.xyt)
        np.add.at(w, (idx[:, 0], idx[:, 1], idx[:, 2]), 1.0)
    return BinnedWeights(grid, w)

"""SE(2) geometry kernel.

Poses, oriented boxes, polylines and 0.1 m occupancy grids, plus the exact
intersection tests used to validate the raster collision path.

Grid conventions: cell ``(r, c)`` covers the half-open square
``[ox + c*res, ox + (c+1)*res) x [oy + r*res, oy + (r+1)*res)``; rows follow
y and columns follow x.  Boxes mark cells whose *center* lies inside the box
(boundary inclusive).  Polylines mark every half-open cell the segment
passes through (supercover).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .errors import InvalidArgument

EPS_DISP = 1e-3
DEFAULT_RESOLUTION = 0.1
DEFAULT_HALF_EXTENT = 55.0
# Inclusive-boundary slack for containment/touching tests.
_TOL = 1e-9


def normalize_angle(angle: float) -> float:
    """Wrap an angle to (-pi, pi]. Values already in range are returned untouched."""
    if -math.pi < angle <= math.pi:
        return angle
    angle = math.fmod(angle, 2.0 * math.pi)
    if angle > math.pi:
        angle -= 2.0 * math.pi
    elif angle <= -math.pi:
        angle += 2.0 * math.pi
    return angle


@dataclass(frozen=True)
class Pose2D:
    x: float
    y: float
    yaw: float = 0.0

    def __post_init__(self):
        for name in ("x", "y", "yaw"):
            value = float(getattr(self, name))
            if not math.isfinite(value):
                raise InvalidArgument(f"Pose2D.{name} must be finite, got {value}")
            object.__setattr__(self, name, value)
        object.__setattr__(self, "yaw", normalize_angle(self.yaw))

    @property
    def xy(self) -> np.ndarray:
        return np.array([self.x, self.y])

    @property
    def heading(self) -> np.ndarray:
        return np.array([math.cos(self.yaw), math.sin(self.yaw)])


@dataclass(frozen=True)
class OrientedBox:
    center: Pose2D
    length: float
    width: float

    def __post_init__(self):
        for name in ("length", "width"):
            value = float(getattr(self, name))
            if not (math.isfinite(value) and value > 0):
                raise InvalidArgument(f"OrientedBox.{name} must be positive and finite, got {value}")
            object.__setattr__(self, name, value)

    def corners(self) -> np.ndarray:
        """Corners as a (4, 2) array in counter-clockwise order, front-left first."""
        c, s = math.cos(self.center.yaw), math.sin(self.center.yaw)
        hl, hw = 0.5 * self.length, 0.5 * self.width
        local = np.array([[hl, hw], [-hl, hw], [-hl, -hw], [hl, -hw]])
        rot = np.array([[c, -s], [s, c]])
        return local @ rot.T + np.array([self.center.x, self.center.y])

    def axes(self) -> np.ndarray:
        """Unit heading and left-normal as rows of a (2, 2) array."""
        c, s = math.cos(self.center.yaw), math.sin(self.center.yaw)
        return np.array([[c, s], [-s, c]])

    def bounds(self) -> tuple[float, float, float, float]:
        """Axis-aligned extent (xmin, xmax, ymin, ymax)."""
        c, s = abs(math.cos(self.center.yaw)), abs(math.sin(self.center.yaw))
        hl, hw = 0.5 * self.length, 0.5 * self.width
        ex = hl * c + hw * s
        ey = hl * s + hw * c
        return self.center.x - ex, self.center.x + ex, self.center.y - ey, self.center.y + ey


class Polyline:
    """Ordered 2D points in the global frame; at least two, consecutive points distinct."""

    __slots__ = ("points",)

    def __init__(self, points):
        pts = np.array(points, dtype=float)
        if pts.ndim != 2 or pts.shape[1] != 2 or len(pts) < 2:
            raise InvalidArgument(f"Polyline needs >= 2 (x, y) points, got shape {pts.shape}")
        if not np.all(np.isfinite(pts)):
            raise InvalidArgument("Polyline points must be finite")
        if np.any(np.all(pts[1:] == pts[:-1], axis=1)):
            raise InvalidArgument("Polyline has repeated consecutive points")
        pts.flags.writeable = False
        self.points = pts

    def segments(self) -> tuple[np.ndarray, np.ndarray]:
        return self.points[:-1], self.points[1:]

    def __len__(self):
        return len(self.points)

    def __eq__(self, other):
        return isinstance(other, Polyline) and np.array_equal(self.points, other.points)

    def __repr__(self):
        return f"Polyline({len(self.points)} points)"


class OccupancyGrid:
    """Boolean raster with its (0, 0) cell corner at ``origin``.

    Mutated only by the rasterize functions while it is being built; call
    :meth:`freeze` before sharing it.
    """

    def __init__(self, origin, resolution: float, rows: int, cols: int, cells: np.ndarray | None = None):
        if not resolution > 0:
            raise InvalidArgument(f"grid resolution must be > 0, got {resolution}")
        if rows < 0 or cols < 0:
            raise InvalidArgument("grid shape must be non-negative")
        self.origin = (float(origin[0]), float(origin[1]))
        self.resolution = float(resolution)
        self.rows = int(rows)
        self.cols = int(cols)
        if cells is None:
            cells = np.zeros((self.rows, self.cols), dtype=bool)
        elif cells.shape != (self.rows, self.cols):
            raise InvalidArgument(f"cells shape {cells.shape} != ({rows}, {cols})")
        self.cells = cells

    @classmethod
    def window(cls, center, half_extent: float = DEFAULT_HALF_EXTENT,
               resolution: float = DEFAULT_RESOLUTION) -> "OccupancyGrid":
        """Square window around ``center`` snapped to the global lattice of ``resolution``."""
        if not half_extent > 0:
            raise InvalidArgument(f"half_extent must be > 0, got {half_extent}")
        ox = math.floor((center[0] - half_extent) / resolution) * resolution
        oy = math.floor((center[1] - half_extent) / resolution) * resolution
        n = int(math.ceil(2.0 * half_extent / resolution)) + 1
        return cls((ox, oy), resolution, n, n)

    def subgrid(self, xmin: float, xmax: float, ymin: float, ymax: float) -> "OccupancyGrid":
        """Fresh empty grid over the cells of this one that overlap the given extent."""
        res = self.resolution
        c0 = max(0, math.floor((xmin - self.origin[0]) / res))
        c1 = min(self.cols, math.floor((xmax - self.origin[0]) / res) + 1)
        r0 = max(0, math.floor((ymin - self.origin[1]) / res))
        r1 = min(self.rows, math.floor((ymax - self.origin[1]) / res) + 1)
        rows, cols = max(0, r1 - r0), max(0, c1 - c0)
        return OccupancyGrid((self.origin[0] + c0 * res, self.origin[1] + r0 * res), res, rows, cols)

    def freeze(self) -> "OccupancyGrid":
        self.cells.flags.writeable = False
        return self

    def count(self) -> int:
        return int(self.cells.sum())

    def set_cells(self) -> np.ndarray:
        """(k, 2) array of (row, col) indices of occupied cells."""
        return np.argwhere(self.cells)

    def cell_center(self, row: int, col: int) -> tuple[float, float]:
        res = self.resolution
        return self.origin[0] + (col + 0.5) * res, self.origin[1] + (row + 0.5) * res

    def cell_bounds(self, row: int, col: int) -> tuple[float, float, float, float]:
        res = self.resolution
        x0 = self.origin[0] + col * res
        y0 = self.origin[1] + row * res
        return x0, x0 + res, y0, y0 + res

    def __repr__(self):
        return (f"OccupancyGrid(origin={self.origin}, resolution={self.resolution}, "
                f"shape=({self.rows}, {self.cols}), set={self.count()})")


# --------------------------------------------------------------------------
# frames and headings


def rotation(yaw: float) -> np.ndarray:
    c, s = math.cos(yaw), math.sin(yaw)
    return np.array([[c, -s], [s, c]])


def to_global(ego_pose: Pose2D, points) -> np.ndarray:
    """Map ego-frame points to the global frame: ``R(yaw) p + (x, y)``."""
    pts = np.asarray(points, dtype=float).reshape(-1, 2)
    return pts @ rotation(ego_pose.yaw).T + np.array([ego_pose.x, ego_pose.y])


def to_local(ego_pose: Pose2D, points) -> np.ndarray:
    """Inverse of :func:`to_global`."""
    pts = np.asarray(points, dtype=float).reshape(-1, 2)
    return (pts - np.array([ego_pose.x, ego_pose.y])) @ rotation(ego_pose.yaw)


def estimate_yaws(waypoints, initial_yaw: float = 0.0) -> list[float]:
    """Heading at each waypoint from the displacement to the next one.

    The last waypoint reuses the preceding segment's heading.  Segments
    shorter than ``EPS_DISP`` carry the previous heading forward, starting
    from ``initial_yaw``.
    """
    pts = np.asarray(waypoints, dtype=float).reshape(-1, 2)
    n = len(pts)
    if n == 0:
        raise InvalidArgument("estimate_yaws needs at least one waypoint")
    yaw = normalize_angle(float(initial_yaw))
    yaws = []
    for i in range(n):
        j = min(i, n - 2)
        if j >= 0:
            dx, dy = pts[j + 1] - pts[j]
            if math.hypot(dx, dy) >= EPS_DISP:
                yaw = normalize_angle(math.atan2(dy, dx))
        yaws.append(yaw)
    return yaws


def make_footprint(point, yaw: float, dims) -> OrientedBox:
    length, width = dims
    if not (length > 0 and width > 0):
        raise InvalidArgument(f"footprint dims must be positive, got {tuple(dims)}")
    return OrientedBox(Pose2D(float(point[0]), float(point[1]), float(yaw)), length, width)


# --------------------------------------------------------------------------
# rasterization


def _box_cell_mask(grid: OccupancyGrid, box: OrientedBox):
    """Cells of ``grid`` whose centers lie in ``box``: (r0, c0, mask) or None if empty."""
    res = grid.resolution
    ox, oy = grid.origin
    xmin, xmax, ymin, ymax = box.bounds()
    c0 = max(0, math.ceil((xmin - ox) / res - 0.5 - _TOL))
    c1 = min(grid.cols - 1, math.floor((xmax - ox) / res - 0.5 + _TOL))
    r0 = max(0, math.ceil((ymin - oy) / res - 0.5 - _TOL))
    r1 = min(grid.rows - 1, math.floor((ymax - oy) / res - 0.5 + _TOL))
    if c1 < c0 or r1 < r0:
        return None
    dx = ox + (np.arange(c0, c1 + 1) + 0.5) * res - box.center.x
    dy = oy + (np.arange(r0, r1 + 1) + 0.5) * res - box.center.y
    c, s = math.cos(box.center.yaw), math.sin(box.center.yaw)
    u = dx[None, :] * c + dy[:, None] * s
    v = dy[:, None] * c - dx[None, :] * s
    mask = (np.abs(u) <= 0.5 * box.length + _TOL) & (np.abs(v) <= 0.5 * box.width + _TOL)
    return r0, c0, mask


def rasterize_box(grid: OccupancyGrid, box: OrientedBox) -> OccupancyGrid:
    """Set every cell whose center is inside ``box``; cells outside the grid are ignored."""
    hit = _box_cell_mask(grid, box)
    if hit is not None:
        r0, c0, mask = hit
        grid.cells[r0:r0 + mask.shape[0], c0:c0 + mask.shape[1]] |= mask
    return grid


def box_hits_grid(grid: OccupancyGrid, box: OrientedBox) -> bool:
    """True iff some set cell has its center inside ``box``."""
    hit = _box_cell_mask(grid, box)
    if hit is None:
        return False
    r0, c0, mask = hit
    return bool(np.any(grid.cells[r0:r0 + mask.shape[0], c0:c0 + mask.shape[1]] & mask))


def _clip_segments(p: np.ndarray, q: np.ndarray, xmax: float, ymax: float):
    """Liang-Barsky clip of segments (grid units) to [0, xmax] x [0, ymax]."""
    d = q - p
    t0 = np.zeros(len(p))
    t1 = np.ones(len(p))
    keep = np.ones(len(p), dtype=bool)
    for pk, qk in ((-d[:, 0], p[:, 0]), (d[:, 0], xmax - p[:, 0]),
                   (-d[:, 1], p[:, 1]), (d[:, 1], ymax - p[:, 1])):
        parallel = pk == 0
        keep &= ~(parallel & (qk < 0))
        with np.errstate(divide="ignore", invalid="ignore"):
            r = qk / pk
        t0 = np.where(pk < 0, np.maximum(t0, r), t0)
        t1 = np.where(pk > 0, np.minimum(t1, r), t1)
    keep &= t0 <= t1
    p, d, t0, t1 = p[keep], d[keep], t0[keep], t1[keep]
    return p + t0[:, None] * d, p + t1[:, None] * d


def _line_crossings(a: np.ndarray, b: np.ndarray):
    """For each segment coordinate pair (a, b), the integer lines k with min <= k <= max.

    Returns (segment index, k) flat arrays.
    """
    lo = np.ceil(np.minimum(a, b))
    hi = np.floor(np.maximum(a, b))
    n = np.where(a != b, np.maximum(hi - lo + 1, 0), 0).astype(np.int64)
    seg = np.repeat(np.arange(len(a)), n)
    starts = np.repeat(np.cumsum(n) - n, n)
    k = np.repeat(lo, n) + (np.arange(n.sum()) - starts)
    return seg, k


def rasterize_segments(grid: OccupancyGrid, p: np.ndarray, q: np.ndarray) -> OccupancyGrid:
    """Supercover-rasterize segments ``p[i] -> q[i]`` ((n, 2) arrays, global frame)."""
    if len(p) == 0 or grid.rows == 0 or grid.cols == 0:
        return grid
    res = grid.resolution
    org = np.array(grid.origin)
    far = org + res * np.array([grid.cols, grid.rows])
    near = np.all(np.maximum(p, q) >= org, axis=1) & np.all(np.minimum(p, q) <= far, axis=1)
    if not near.all():
        p, q = p[near], q[near]
        if len(p) == 0:
            return grid
    p, q = _clip_segments((p - org) / res, (q - org) / res, float(grid.cols), float(grid.rows))
    if len(p) == 0:
        return grid
    d = q - p
    # Breakpoints: crossings of vertical lines (x snapped exactly), horizontal lines
    # (y snapped exactly) and segment endpoints.  Between consecutive breakpoints the
    # segment stays in one cell, identified by the midpoint.
    sx, kx = _line_crossings(p[:, 0], q[:, 0])
    tx = (kx - p[sx, 0]) / d[sx, 0]
    sy, ky = _line_crossings(p[:, 1], q[:, 1])
    ty = (ky - p[sy, 1]) / d[sy, 1]
    m = len(p)
    seg = np.concatenate([np.arange(m), np.arange(m), sx, sy])
    t = np.clip(np.concatenate([np.zeros(m), np.ones(m), tx, ty]), 0.0, 1.0)
    pts = p[seg] + t[:, None] * d[seg]
    nx = 2 * m + len(sx)
    pts[2 * m:nx, 0] = kx
    pts[nx:, 1] = ky
    order = np.lexsort((t, seg))
    seg, t = seg[order], t[order]
    same = seg[1:] == seg[:-1]
    tm = 0.5 * (t[1:] + t[:-1])[same]
    sm = seg[1:][same]
    mids = p[sm] + tm[:, None] * d[sm]
    allpts = np.concatenate([pts, mids])
    cols = np.floor(allpts[:, 0]).astype(np.int64)
    rows = np.floor(allpts[:, 1]).astype(np.int64)
    ok = (cols >= 0) & (cols < grid.cols) & (rows >= 0) & (rows < grid.rows)
    grid.cells[rows[ok], cols[ok]] = True
    return grid


def rasterize_polyline(grid: OccupancyGrid, line: Polyline) -> OccupancyGrid:
    """Supercover rasterization: set every cell that any segment passes through."""
    p, q = line.segments()
    return rasterize_segments(grid, p, q)


def stack_segments(lines: Iterable[Polyline]) -> tuple[np.ndarray, np.ndarray]:
    """All segments of ``lines`` as (starts, ends) arrays."""
    lines = list(lines)
    if not lines:
        return np.zeros((0, 2)), np.zeros((0, 2))
    return (np.concatenate([ln.points[:-1] for ln in lines]),
            np.concatenate([ln.points[1:] for ln in lines]))


def rasterize_polylines(grid: OccupancyGrid, lines: Iterable[Polyline]) -> OccupancyGrid:
    return rasterize_segments(grid, *stack_segments(lines))


# --------------------------------------------------------------------------
# exact oracles


def _project(points: np.ndarray, axis: np.ndarray) -> tuple[float, float]:
    proj = points @ axis
    return float(proj.min()), float(proj.max())


def _sat_overlaps(pa: np.ndarray, pb: np.ndarray, axes: Sequence[np.ndarray]) -> list[float]:
    """Projection overlap along each axis (negative means a separating gap)."""
    out = []
    for axis in axes:
        amin, amax = _project(pa, axis)
        bmin, bmax = _project(pb, axis)
        out.append(min(amax, bmax) - max(amin, bmin))
    return out


def exact_box_box_intersect(a: OrientedBox, b: OrientedBox) -> bool:
    """Separating-axis test over both boxes' edge normals; touching counts."""
    axes = list(a.axes()) + list(b.axes())
    return min(_sat_overlaps(a.corners(), b.corners(), axes)) >= -_TOL


def _point_segment_distance(pt, a, b) -> float:
    ab = b - a
    denom = float(ab @ ab)
    t = 0.0 if denom == 0 else min(1.0, max(0.0, float((pt - a) @ ab) / denom))
    return float(np.hypot(*(a + t * ab - pt)))


def _segments_cross(p1, p2, q1, q2) -> bool:
    def orient(a, b, c):
        return (b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0])

    d1, d2 = orient(q1, q2, p1), orient(q1, q2, p2)
    d3, d4 = orient(p1, p2, q1), orient(p1, p2, q2)
    return d1 * d2 < 0 and d3 * d4 < 0


def segment_segment_distance(p1, p2, q1, q2) -> float:
    p1, p2, q1, q2 = (np.asarray(v, dtype=float) for v in (p1, p2, q1, q2))
    if _segments_cross(p1, p2, q1, q2):
        return 0.0
    return min(_point_segment_distance(p1, q1, q2), _point_segment_distance(p2, q1, q2),
               _point_segment_distance(q1, p1, p2), _point_segment_distance(q2, p1, p2))


def _polygon_distance(pa: np.ndarray, pb: np.ndarray) -> float:
    best = math.inf
    for i in range(len(pa)):
        for j in range(len(pb)):
            best = min(best, segment_segment_distance(pa[i], pa[(i + 1) % len(pa)],
                                                      pb[j], pb[(j + 1) % len(pb)]))
    return best


def box_box_separation(a: OrientedBox, b: OrientedBox) -> float:
    """Signed separation: Euclidean gap if disjoint, minus the penetration depth otherwise."""
    pa, pb = a.corners(), b.corners()
    overlaps = _sat_overlaps(pa, pb, list(a.axes()) + list(b.axes()))
    if min(overlaps) < 0:
        return _polygon_distance(pa, pb)
    return -min(overlaps)


def _segment_in_box_frame(box: OrientedBox, p, q):
    c, s = math.cos(box.center.yaw), math.sin(box.center.yaw)
    rot = np.array([[c, s], [-s, c]])
    ctr = np.array([box.center.x, box.center.y])
    return rot @ (np.asarray(p, dtype=float) - ctr), rot @ (np.asarray(q, dtype=float) - ctr)


def _segment_hits_box(box: OrientedBox, p, q) -> bool:
    """Closed segment vs closed box, via Liang-Barsky in the box frame."""
    a, b = _segment_in_box_frame(box, p, q)
    hx, hy = 0.5 * box.length + _TOL, 0.5 * box.width + _TOL
    d = b - a
    t0, t1 = 0.0, 1.0
    for pk, qk in ((-d[0], a[0] + hx), (d[0], hx - a[0]), (-d[1], a[1] + hy), (d[1], hy - a[1])):
        if pk == 0:
            if qk < 0:
                return False
            continue
        r = qk / pk
        if pk < 0:
            t0 = max(t0, r)
        else:
            t1 = min(t1, r)
        if t0 > t1:
            return False
    return True


def exact_box_polyline_intersect(box: OrientedBox, line: Polyline) -> bool:
    """True iff some segment touches, crosses or lies inside ``box``."""
    p, q = line.segments()
    return any(_segment_hits_box(box, a, b) for a, b in zip(p, q))


def _segment_penetration(box: OrientedBox, p, q) -> float:
    corners = box.corners()
    seg = np.array([p, q], dtype=float)
    axes = list(box.axes())
    d = seg[1] - seg[0]
    norm = math.hypot(*d)
    if norm > 0:
        axes.append(np.array([-d[1], d[0]]) / norm)
    return min(_sat_overlaps(corners, seg, axes))


def box_polyline_separation(box: OrientedBox, line: Polyline) -> float:
    """Signed separation: gap to the nearest segment, or minus the deepest segment penetration."""
    p, q = line.segments()
    hits = [i for i in range(len(p)) if _segment_hits_box(box, p[i], q[i])]
    if hits:
        return -max(_segment_penetration(box, p[i], q[i]) for i in hits)
    corners = box.corners()
    return min(segment_segment_distance(p[i], q[i], corners[j], corners[(j + 1) % 4])
               for i in range(len(p)) for j in range(4))

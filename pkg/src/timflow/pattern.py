"""Dispense patterns, grids, and rasterization by unweighted area sampling.

A dispense pattern is a polygonal chain with one feed rate per segment (the
amount of material laid down per unit of travel). To rasterize, every segment
is widened to a rectangle of width one grid cell, flat-capped at both ends,
and each cell receives ``feed * overlap_area(cell, rectangle)``. Overlaps are
computed exactly by clipping the rectangle against the cell, so axis-aligned
segments tile cells with no sampling error and a segment's total deposited
mass equals ``feed * length`` whenever the rectangle stays inside the grid.

Grid convention: ``amounts[row, col]`` maps ``row`` to y and ``col`` to x;
the cell ``(i, j)`` covers the square ``[i, i+1] x [j, j+1]`` in pattern
coordinates (i along x, j along y).
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass

import numpy as np

from .errors import InvalidPattern, NonPositiveGap, OutOfBounds, TargetTooSmall

# Slack when testing rectangle corners against the grid border; computed unit
# normals can round a hair past an edge the geometry exactly touches.
_BOUNDS_EPS = 1e-9


@dataclass(frozen=True)
class GridSpec:
    """Grid resolution (rows, cols); cells are fixed 1x1 squares."""

    resolution: tuple[int, int] = (50, 50)

    def __post_init__(self):
        h, w = self.resolution
        if int(h) != h or int(w) != w or h < 1 or w < 1:
            raise ValueError(f"resolution must be positive integers, got {self.resolution}")
        object.__setattr__(self, "resolution", (int(h), int(w)))

    @property
    def height(self) -> int:
        return self.resolution[0]

    @property
    def width(self) -> int:
        return self.resolution[1]


class TimGrid:
    """Rectangular field of non-negative material amounts (mean height per cell).

    Immutable after construction: the backing array is marked read-only, so a
    grid can be shared freely between threads.
    """

    __slots__ = ("_amounts",)

    def __init__(self, amounts, dtype=None, copy=True):
        arr = np.array(amounts, dtype=dtype, copy=copy)
        if not np.issubdtype(arr.dtype, np.floating):
            arr = arr.astype(np.float64)
        if arr.ndim != 2 or arr.shape[0] < 1 or arr.shape[1] < 1:
            raise ValueError(f"amounts must be a 2D array with positive shape, got {arr.shape}")
        if not np.all(np.isfinite(arr)):
            raise ValueError("amounts must be finite")
        if (arr < 0).any():
            raise ValueError("amounts must be non-negative")
        arr.flags.writeable = False
        self._amounts = arr

    @property
    def amounts(self) -> np.ndarray:
        return self._amounts

    @property
    def height(self) -> int:
        return self._amounts.shape[0]

    @property
    def width(self) -> int:
        return self._amounts.shape[1]

    @property
    def shape(self) -> tuple[int, int]:
        return self._amounts.shape

    def total(self) -> float:
        return float(self._amounts.sum())

    def astype(self, dtype) -> "TimGrid":
        return TimGrid(self._amounts.astype(dtype), copy=False)

    def __eq__(self, other):
        if not isinstance(other, TimGrid):
            return NotImplemented
        return self.shape == other.shape and np.array_equal(self._amounts, other._amounts)

    def __hash__(self):
        return hash((self.shape, self._amounts.tobytes()))

    def __repr__(self):
        return (f"TimGrid({self.height}x{self.width}, total={self.total():.4g}, "
                f"max={float(self._amounts.max()):.4g})")


@dataclass(frozen=True)
class DispensePattern:
    """Polygonal dispense path with a feed rate per segment.

    ``points`` are continuous (x, y) coordinates in grid units; ``feeds[k]``
    is the amount deposited per unit length along segment k. Consecutive
    points may coincide only when the segment's feed is zero (such zero-feed,
    zero-length carrier segments are how shorter patterns are padded to a
    fixed segment count).
    """

    points: tuple[tuple[float, float], ...]
    feeds: tuple[float, ...]

    def __post_init__(self):
        try:
            points = tuple((float(x), float(y)) for x, y in self.points)
            feeds = tuple(float(f) for f in self.feeds)
        except (TypeError, ValueError) as exc:
            raise InvalidPattern(f"points/feeds are not numeric pairs and numbers: {exc}") from exc
        object.__setattr__(self, "points", points)
        object.__setattr__(self, "feeds", feeds)
        if len(points) < 2:
            raise InvalidPattern(f"a pattern needs at least 2 points, got {len(points)}")
        if len(feeds) != len(points) - 1:
            raise InvalidPattern(
                f"expected {len(points) - 1} feeds for {len(points)} points, got {len(feeds)}")
        for k, (x, y) in enumerate(points):
            if not (math.isfinite(x) and math.isfinite(y)):
                raise InvalidPattern(f"points[{k}] is not finite: ({x}, {y})")
        for k, f in enumerate(feeds):
            if not math.isfinite(f) or f < 0:
                raise InvalidPattern(f"feeds[{k}] must be finite and >= 0, got {f}")
        for k, f in enumerate(feeds):
            x0, y0 = points[k]
            x1, y1 = points[k + 1]
            if x0 == x1 and y0 == y1 and f != 0.0:
                raise InvalidPattern(f"segment {k} has zero length but feed {f}")

    @property
    def segment_count(self) -> int:
        return len(self.feeds)

    def segments(self):
        """Yield (p0, p1, feed) per segment."""
        for k, f in enumerate(self.feeds):
            yield self.points[k], self.points[k + 1], f

    def translated(self, dx: float, dy: float) -> "DispensePattern":
        return DispensePattern(
            tuple((x + dx, y + dy) for x, y in self.points), self.feeds)

    def to_json(self) -> dict:
        return {"points": [[x, y] for x, y in self.points], "feeds": list(self.feeds)}

    @classmethod
    def from_json(cls, data) -> "DispensePattern":
        """Build from the {"points": [[x, y], ...], "feeds": [...]} schema."""
        if isinstance(data, (str, bytes)):
            try:
                data = json.loads(data)
            except json.JSONDecodeError as exc:
                raise InvalidPattern(f"pattern is not valid JSON: {exc}") from exc
        if not isinstance(data, dict):
            raise InvalidPattern(f"pattern must be an object, got {type(data).__name__}")
        unknown = set(data) - {"points", "feeds"}
        if unknown:
            raise InvalidPattern(f"unknown pattern fields: {sorted(unknown)}")
        if "points" not in data:
            raise InvalidPattern("missing field: points")
        if "feeds" not in data:
            raise InvalidPattern("missing field: feeds")
        points = data["points"]
        feeds = data["feeds"]
        if not isinstance(points, list):
            raise InvalidPattern("points: expected a list of [x, y] pairs")
        if not isinstance(feeds, list):
            raise InvalidPattern("feeds: expected a list of numbers")
        for k, p in enumerate(points):
            if not isinstance(p, (list, tuple)) or len(p) != 2 \
                    or not all(isinstance(v, (int, float)) and not isinstance(v, bool) for v in p):
                raise InvalidPattern(f"points[{k}]: expected [x, y] numbers, got {p!r}")
        for k, f in enumerate(feeds):
            if not isinstance(f, (int, float)) or isinstance(f, bool):
                raise InvalidPattern(f"feeds[{k}]: expected a number, got {f!r}")
        return cls(tuple((float(x), float(y)) for x, y in points), tuple(map(float, feeds)))


def _clip_half_plane(pts, axis, bound, keep_greater):
    """Sutherland-Hodgman pass against one axis-aligned half-plane."""
    out = []
    n = len(pts)
    for idx in range(n):
        cur = pts[idx]
        prev = pts[idx - 1]
        if keep_greater:
            cur_in = cur[axis] >= bound
            prev_in = prev[axis] >= bound
        else:
            cur_in = cur[axis] <= bound
            prev_in = prev[axis] <= bound
        if cur_in != prev_in:
            t = (bound - prev[axis]) / (cur[axis] - prev[axis])
            out.append((prev[0] + t * (cur[0] - prev[0]),
                        prev[1] + t * (cur[1] - prev[1])))
        if cur_in:
            out.append(cur)
    return out


def _polygon_area(pts) -> float:
    if len(pts) < 3:
        return 0.0
    acc = 0.0
    n = len(pts)
    for idx in range(n):
        x0, y0 = pts[idx - 1]
        x1, y1 = pts[idx]
        acc += x0 * y1 - x1 * y0
    return abs(acc) * 0.5


def _unit_cell_overlap(corners) -> float:
    """Area of a convex polygon (cell-local coordinates) inside [0,1]^2."""
    pts = _clip_half_plane(corners, 0, 0.0, True)
    if not pts:
        return 0.0
    pts = _clip_half_plane(pts, 0, 1.0, False)
    if not pts:
        return 0.0
    pts = _clip_half_plane(pts, 1, 0.0, True)
    if not pts:
        return 0.0
    pts = _clip_half_plane(pts, 1, 1.0, False)
    area = _polygon_area(pts)
    return min(max(area, 0.0), 1.0)


def _half_width_offset(p0, p1):
    """Returns (offset, length): offset is half the unit normal of p0->p1."""
    dx = p1[0] - p0[0]
    dy = p1[1] - p0[1]
    length = math.hypot(dx, dy)
    if length == 0.0:
        return None, 0.0
    return (-dy / length * 0.5, dx / length * 0.5), length


def segment_cell_overlap(segment, cell) -> float:
    """Overlap area between cell (i, j) and the unit-width rectangle of a segment.

    ``segment`` is a pair of (x, y) endpoints, ``cell`` is the (i, j) index of
    the square [i, i+1] x [j, j+1]. A degenerate (zero-length) segment has no
    rectangle and overlaps nothing.
    """
    p0, p1 = segment
    offset, length = _half_width_offset(p0, p1)
    if offset is None:
        return 0.0
    i, j = cell
    ox, oy = offset
    # Shift into cell-local coordinates before applying the half-width offset;
    # that keeps the arithmetic identical for integer-translated inputs.
    bx0, by0 = p0[0] - i, p0[1] - j
    bx1, by1 = p1[0] - i, p1[1] - j
    corners = [(bx0 + ox, by0 + oy), (bx1 + ox, by1 + oy),
               (bx1 - ox, by1 - oy), (bx0 - ox, by0 - oy)]
    return _unit_cell_overlap(corners)


def discretize(pattern: DispensePattern, spec: GridSpec | None = None) -> TimGrid:
    """Rasterize a pattern onto a grid by exact rectangle/cell overlap areas.

    Every cell receives ``sum over segments of feed * overlap_area``. Raises
    OutOfBounds if any segment's rectangle pokes past the grid border
    (zero-length carrier segments have no rectangle and are skipped).
    """
    spec = spec or GridSpec()
    h, w = spec.resolution
    amounts = np.zeros((h, w), dtype=np.float64)
    for k, (p0, p1, feed) in enumerate(pattern.segments()):
        offset, length = _half_width_offset(p0, p1)
        if offset is None:
            continue
        ox, oy = offset
        xs = (p0[0] + ox, p1[0] + ox, p1[0] - ox, p0[0] - ox)
        ys = (p0[1] + oy, p1[1] + oy, p1[1] - oy, p0[1] - oy)
        if min(xs) < -_BOUNDS_EPS or max(xs) > w + _BOUNDS_EPS \
                or min(ys) < -_BOUNDS_EPS or max(ys) > h + _BOUNDS_EPS:
            raise OutOfBounds(
                f"segment {k}: rectangle x=[{min(xs):.3f},{max(xs):.3f}] "
                f"y=[{min(ys):.3f},{max(ys):.3f}] exceeds the {w}x{h} grid")
        if feed == 0.0:
            continue
        i_lo = max(int(math.floor(min(xs))), 0)
        i_hi = min(int(math.ceil(max(xs))), w)
        j_lo = max(int(math.floor(min(ys))), 0)
        j_hi = min(int(math.ceil(max(ys))), h)
        for i in range(i_lo, i_hi):
            bx0, bx1 = p0[0] - i, p1[0] - i
            for j in range(j_lo, j_hi):
                by0, by1 = p0[1] - j, p1[1] - j
                corners = [(bx0 + ox, by0 + oy), (bx1 + ox, by1 + oy),
                           (bx1 - ox, by1 - oy), (bx0 - ox, by0 - oy)]
                area = _unit_cell_overlap(corners)
                if area > 0.0:
                    amounts[j, i] += feed * area
    return TimGrid(amounts, copy=False)


def scale_for_gap(grid: TimGrid, gap: float) -> TimGrid:
    """Divide all amounts by the gap height.

    Compressing the scaled grid to height 1 and multiplying the result by
    ``gap`` is equivalent to compressing the original grid down to ``gap``.
    """
    if not (isinstance(gap, (int, float)) and math.isfinite(gap)) or gap <= 0:
        raise NonPositiveGap(f"gap must be a positive finite number, got {gap!r}")
    return TimGrid(grid.amounts / gap, copy=False)


def pad_pattern(pattern: DispensePattern, target_segments: int) -> DispensePattern:
    """Append zero-feed, zero-length segments until the count reaches the target.

    The padded pattern rasterizes to exactly the same grid; padding only
    exists so patterns can share a fixed-size parameter layout.
    """
    extra = target_segments - pattern.segment_count
    if extra < 0:
        raise TargetTooSmall(
            f"target {target_segments} is below current {pattern.segment_count} segments")
    if extra == 0:
        return pattern
    last = pattern.points[-1]
    return DispensePattern(pattern.points + (last,) * extra,
                           pattern.feeds + (0.0,) * extra)

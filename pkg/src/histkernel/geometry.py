"""Polygon primitives and the scalar measurements everything downstream consumes.

Coordinates are float pixels, x growing right and y growing down (image
convention). Every polygon is a simple closed ring normalized to positive
shoelace area at construction time, so all downstream signed-area logic can
assume one orientation.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Literal, Sequence

import numpy as np
import shapely
from shapely.errors import GEOSException
from shapely.geometry import Polygon as _SPolygon

Direction = Literal["vertical", "horizontal"]

#: Grid used to rescue boolean operations that fail on near-degenerate input.
SNAP_TOLERANCE = 1e-7


class GeometryError(Exception):
    """Base class for geometric failures."""


class DegenerateGeometryError(GeometryError):
    """Input too degenerate (zero area, zero side length) for the operation."""


class ClippingError(GeometryError):
    """A polygon boolean operation failed even after coordinate snapping."""


class UnsupportedAnnotationError(GeometryError):
    """Vertex layout not covered by the two-polyline annotation convention."""


@dataclass(frozen=True)
class Point:
    """A single vertex in pixel coordinates."""

    x: float
    y: float

    def __post_init__(self) -> None:
        if not (math.isfinite(self.x) and math.isfinite(self.y)):
            raise ValueError(f"point coordinates must be finite, got ({self.x}, {self.y})")


class Polygon:
    """Simple closed ring with counter-clockwise (positive shoelace) orientation.

    The input ring may or may not repeat the first vertex at the end; the
    closing edge is always implicit in the stored form. Consecutive duplicate
    vertices are merged. When the signed area of the input is negative the
    vertex *sequence* is reversed (``vertices[::-1]``), which flips orientation
    while keeping two-polyline annotation layouts (control points 0..k-1 /
    k..2k-1) intact.
    """

    __slots__ = ("_vertices", "_shapely")

    def __init__(self, vertices: Iterable[Sequence[float]] | np.ndarray):
        arr = np.asarray(vertices, dtype=float)
        if arr.ndim != 2 or arr.shape[1] != 2:
            raise ValueError(f"expected an (n, 2) vertex array, got shape {arr.shape}")
        if not np.all(np.isfinite(arr)):
            raise ValueError("polygon vertices must be finite")
        if len(arr) >= 2 and np.array_equal(arr[0], arr[-1]):
            arr = arr[:-1]
        arr = _drop_consecutive_duplicates(arr)
        if len(arr) < 3:
            raise ValueError("a polygon needs at least 3 distinct vertices")
        signed = _signed_area(arr)
        if abs(signed) < 1e-12:
            raise DegenerateGeometryError("polygon has zero area")
        if signed < 0:
            arr = arr[::-1].copy()
        _check_simple(arr)
        arr.setflags(write=False)
        object.__setattr__(self, "_vertices", arr)
        object.__setattr__(self, "_shapely", None)

    def __setattr__(self, name, value):  # pragma: no cover - guard rail
        raise AttributeError("Polygon is immutable")

    @property
    def vertices(self) -> np.ndarray:
        """Read-only (n, 2) vertex array, closing edge implicit."""
        return self._vertices

    def __len__(self) -> int:
        return len(self._vertices)

    def __repr__(self) -> str:
        return f"Polygon({len(self)} vertices, area={self.area:.3f})"

    @property
    def area(self) -> float:
        return _signed_area(self._vertices)

    @property
    def perimeter(self) -> float:
        closed = np.vstack([self._vertices, self._vertices[:1]])
        return float(np.hypot(*np.diff(closed, axis=0).T).sum())

    @property
    def bounds(self) -> tuple[float, float, float, float]:
        """(minx, miny, maxx, maxy)."""
        mins = self._vertices.min(axis=0)
        maxs = self._vertices.max(axis=0)
        return (float(mins[0]), float(mins[1]), float(maxs[0]), float(maxs[1]))

    def to_shapely(self) -> _SPolygon:
        cached = self._shapely
        if cached is None:
            cached = _SPolygon(self._vertices)
            object.__setattr__(self, "_shapely", cached)
        return cached

    @classmethod
    def from_shapely(cls, geom: _SPolygon) -> "Polygon":
        return cls(np.asarray(geom.exterior.coords))

    @classmethod
    def _from_valid_ring(cls, arr: np.ndarray) -> "Polygon":
        """Fast path for rings produced by GEOS, which are already simple.

        Skips the O(n^2) self-intersection test; orientation and ring-closure
        normalization still apply. Never feed user input through this.
        """
        arr = np.asarray(arr, dtype=float)
        if len(arr) >= 2 and arr[0, 0] == arr[-1, 0] and arr[0, 1] == arr[-1, 1]:
            arr = arr[:-1]
        if _signed_area(arr) < 0:
            arr = arr[::-1]
        arr = arr.copy()
        arr.setflags(write=False)
        obj = object.__new__(cls)
        object.__setattr__(obj, "_vertices", arr)
        object.__setattr__(obj, "_shapely", None)
        return obj

    def points(self) -> list[Point]:
        return [Point(float(x), float(y)) for x, y in self._vertices]


@dataclass(frozen=True)
class SideDecomposition:
    """The ring split at its four corners into two long and two short polylines."""

    long_sides: tuple[np.ndarray, np.ndarray]
    short_sides: tuple[np.ndarray, np.ndarray]


def _drop_consecutive_duplicates(arr: np.ndarray) -> np.ndarray:
    if len(arr) < 2:
        return arr
    keep = np.ones(len(arr), dtype=bool)
    keep[1:] = np.any(arr[1:] != arr[:-1], axis=1)
    return arr[keep]


def _signed_area(arr: np.ndarray) -> float:
    x, y = arr[:, 0], arr[:, 1]
    return float(np.dot(x, np.roll(y, -1)) - np.dot(np.roll(x, -1), y)) / 2.0


def _check_simple(arr: np.ndarray) -> None:
    """O(n^2) segment test; raises GeometryError on any self-intersection.

    Vectorized orientation predicates over all non-adjacent edge pairs; pair
    generation is chunked above 1024 vertices so memory stays bounded for
    long traced staircases.
    """
    n = len(arr)
    a = arr
    b = np.roll(arr, -1, axis=0)
    scale = max(float(np.abs(arr).max()), 1.0)
    eps = 1e-9 * scale * scale

    if n <= 1024:
        i, j = np.triu_indices(n, k=2)
        keep = ~((i == 0) & (j == n - 1))
        _check_edge_pairs(a, b, i[keep], j[keep], eps)
    else:
        idx_j = np.arange(n)
        chunk = max(1, 4_000_000 // n)
        for start in range(0, n, chunk):
            idx_i = np.arange(start, min(start + chunk, n))
            ii = np.repeat(idx_i, n)
            jj = np.tile(idx_j, len(idx_i))
            mask = (jj >= ii + 2) & ~((ii == 0) & (jj == n - 1))
            _check_edge_pairs(a, b, ii[mask], jj[mask], eps)

    # fold-back spikes between adjacent edges
    v1 = b - a
    v2 = np.roll(v1, -1, axis=0)
    cr = v1[:, 0] * v2[:, 1] - v1[:, 1] * v2[:, 0]
    dot = (v1 * v2).sum(axis=1)
    if np.any((np.abs(cr) <= eps) & (dot < 0)):
        raise GeometryError("polygon has a fold-back spike")


def _check_edge_pairs(a, b, i, j, eps) -> None:
    if len(i) == 0:
        return
    p1, p2, q1, q2 = a[i], b[i], a[j], b[j]

    def cross(o, p, q):
        return (p[:, 0] - o[:, 0]) * (q[:, 1] - o[:, 1]) - (p[:, 1] - o[:, 1]) * (
            q[:, 0] - o[:, 0]
        )

    d1 = cross(q1, q2, p1)
    d2 = cross(q1, q2, p2)
    d3 = cross(p1, p2, q1)
    d4 = cross(p1, p2, q2)
    proper = (
        (np.sign(d1) * np.sign(d2) < 0)
        & (np.sign(d3) * np.sign(d4) < 0)
        & (np.abs(d1) > eps)
        & (np.abs(d2) > eps)
        & (np.abs(d3) > eps)
        & (np.abs(d4) > eps)
    )
    if proper.any():
        raise GeometryError("polygon is self-intersecting")
    for d, p, s1, s2 in ((d1, p1, q1, q2), (d2, p2, q1, q2), (d3, q1, p1, p2), (d4, q2, p1, p2)):
        if np.any((np.abs(d) <= eps) & _in_box(p, s1, s2)):
            raise GeometryError("polygon edges touch or overlap")


def _in_box(p: np.ndarray, s1: np.ndarray, s2: np.ndarray) -> np.ndarray:
    lo = np.minimum(s1, s2)
    hi = np.maximum(s1, s2)
    return np.all((p >= lo - 1e-12) & (p <= hi + 1e-12), axis=-1)


def polygon_area(p: Polygon) -> float:
    """Shoelace area of the ring in square pixels (strictly positive)."""
    return p.area


def polygon_perimeter(p: Polygon) -> float:
    """Sum of edge lengths including the closing edge."""
    return p.perimeter


def _polyline_length(pts: np.ndarray) -> float:
    if len(pts) < 2:
        return 0.0
    return float(np.hypot(*np.diff(pts, axis=0).T).sum())


def _side_pairs(p: Polygon) -> tuple[tuple[np.ndarray, np.ndarray], tuple[np.ndarray, np.ndarray]]:
    """Split a 2k-gon at the fixed corner indices (0, k-1, k, 2k-1).

    Returns the two control-point runs and the two connecting edges. The
    convention matches annotations that trace k points down one side of a line
    and k back up the other.
    """
    v = p.vertices
    n = len(v)
    if n % 2 != 0:
        raise UnsupportedAnnotationError(
            f"side decomposition needs an even vertex count, got {n}"
        )
    k = n // 2
    run_a = v[0:k]
    run_b = v[k : 2 * k]
    joint_a = v[[k - 1, k]]
    joint_b = np.vstack([v[n - 1], v[0]])
    return (run_a, run_b), (joint_a, joint_b)


def decompose_sides(p: Polygon, n_control: int | None = None) -> SideDecomposition:
    """Partition the ring into two long and two short polylines by length.

    For a quadrilateral this returns the four edges themselves. ``n_control``
    optionally asserts the expected vertex count.
    """
    if n_control is not None and len(p) != n_control:
        raise UnsupportedAnnotationError(
            f"expected {n_control} control points, polygon has {len(p)}"
        )
    runs, joints = _side_pairs(p)
    run_len = (_polyline_length(runs[0]) + _polyline_length(runs[1])) / 2.0
    joint_len = (_polyline_length(joints[0]) + _polyline_length(joints[1])) / 2.0
    if run_len >= joint_len:
        return SideDecomposition(long_sides=runs, short_sides=joints)
    return SideDecomposition(long_sides=joints, short_sides=runs)


def aspect_ratio(p: Polygon) -> float:
    """Longer-side over shorter-side ratio, sides measured as polyline lengths.

    The two long polylines are averaged, as are the two short ones, so the
    result is always >= 1.
    """
    d = decompose_sides(p)
    long_len = (_polyline_length(d.long_sides[0]) + _polyline_length(d.long_sides[1])) / 2.0
    short_len = (_polyline_length(d.short_sides[0]) + _polyline_length(d.short_sides[1])) / 2.0
    if short_len <= 0.0:
        raise DegenerateGeometryError("short side has zero length")
    return long_len / short_len


def text_aspect_ratio(p: Polygon, direction: Direction = "vertical") -> float:
    """Length along the text direction divided by the text width.

    Unlike :func:`aspect_ratio` this is direction-aware and may be < 1 for
    squat lines. The side pair running along the text is the pair whose
    endpoint-to-endpoint chords have the larger total component along the
    direction axis; it is measured on the text line itself, not on kernels.
    """
    if direction not in ("vertical", "horizontal"):
        raise ValueError(f"direction must be 'vertical' or 'horizontal', got {direction!r}")
    axis = 1 if direction == "vertical" else 0
    pair_a, pair_b = _side_pairs(p)

    def chord_component(pair) -> float:
        return sum(abs(float(pts[-1][axis] - pts[0][axis])) for pts in pair)

    along, across = (pair_a, pair_b) if chord_component(pair_a) >= chord_component(pair_b) else (pair_b, pair_a)
    length = (_polyline_length(along[0]) + _polyline_length(along[1])) / 2.0
    width = (_polyline_length(across[0]) + _polyline_length(across[1])) / 2.0
    if width <= 0.0:
        raise DegenerateGeometryError("text width is zero")
    return length / width


def polygon_iou(a: Polygon, b: Polygon) -> float:
    """area(a & b) / area(a | b) via exact polygon clipping.

    Boolean failures on near-degenerate input are retried once on a snapped
    1e-7 px grid and raise :class:`ClippingError` if they persist; the result
    is never a silent 0.
    """
    ga, gb = a.to_shapely(), b.to_shapely()
    try:
        inter = ga.intersection(gb).area
        union = ga.union(gb).area
    except GEOSException:
        try:
            ga = shapely.set_precision(ga, SNAP_TOLERANCE)
            gb = shapely.set_precision(gb, SNAP_TOLERANCE)
            inter = ga.intersection(gb).area
            union = ga.union(gb).area
        except GEOSException as exc:
            raise ClippingError(f"polygon boolean operation failed: {exc}") from exc
    if union <= 0.0:
        raise ClippingError("union of the two polygons has zero area")
    return inter / union


def scale_x(p: Polygon, factor: float) -> Polygon:
    """Multiply every x coordinate by ``factor`` (> 0); area scales by factor."""
    if not (math.isfinite(factor) and factor > 0.0):
        raise ValueError(f"scale factor must be a positive finite number, got {factor}")
    v = p.vertices.copy()
    v[:, 0] *= factor
    return Polygon(v)


def rotate(p: Polygon, angle_deg: float, center: tuple[float, float] = (0.0, 0.0)) -> Polygon:
    """Rigid rotation about ``center``; positive angles rotate x toward y."""
    theta = math.radians(angle_deg)
    c, s = math.cos(theta), math.sin(theta)
    cx, cy = center
    v = p.vertices - (cx, cy)
    rotated = np.column_stack([v[:, 0] * c - v[:, 1] * s, v[:, 0] * s + v[:, 1] * c])
    return Polygon(rotated + (cx, cy))


def translate(p: Polygon, dx: float, dy: float) -> Polygon:
    return Polygon(p.vertices + (dx, dy))


def transpose(p: Polygon) -> Polygon:
    """Swap x and y coordinates (reflection across the main diagonal)."""
    return Polygon(p.vertices[:, ::-1])

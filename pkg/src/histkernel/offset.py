"""Inward/outward polygon offsetting, uniform and anisotropically stretched.

The anisotropic variant offsets by ``dy`` along y but only ``dy/s`` along x.
It is realized as scale-x -> uniform offset -> unscale-x, which is exact
because Minkowski sums commute with linear maps: the effective structuring
element is the ellipse with semi-axes (dy/s, dy).
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from typing import Literal

import numpy as np
from shapely import affinity
from shapely.geometry import MultiPolygon, Polygon as _SPolygon
from shapely.geometry.base import BaseGeometry

from .geometry import Polygon

JoinStyle = Literal["miter", "round"]

#: Offset fragments below this area (px^2) are discarded as vanished material.
MIN_PART_AREA = 1.0

#: Maximum sagitta (px) of the arc approximation used for round joins.
ARC_TOLERANCE = 0.25

_MITRE_LIMIT = 10.0


class OffsetStatus(enum.Enum):
    INTACT = "intact"
    SPLIT = "split"
    VANISHED = "vanished"


@dataclass(frozen=True)
class ShrinkSpec:
    """Target-generation parameters: shrink ratio ``r`` and stretch ratio ``s``.

    ``r`` in [0, 1) controls the shrink distance A*(1-r)/L (r=0 shrinks the
    most); ``s`` >= 1 is the anisotropy factor between the y and x offset
    distances.
    """

    r: float
    s: float = 1.0

    def __post_init__(self) -> None:
        if not (math.isfinite(self.r) and 0.0 <= self.r < 1.0):
            raise ValueError(f"shrink ratio must be in [0, 1), got {self.r}")
        if not (math.isfinite(self.s) and self.s >= 1.0):
            raise ValueError(f"stretch ratio must be >= 1, got {self.s}")


@dataclass(frozen=True)
class OffsetResult:
    parts: tuple[Polygon, ...]
    status: OffsetStatus

    def __post_init__(self) -> None:
        n = len(self.parts)
        expected = {
            OffsetStatus.INTACT: n == 1,
            OffsetStatus.SPLIT: n >= 2,
            OffsetStatus.VANISHED: n == 0,
        }[self.status]
        if not expected:
            raise ValueError(f"status {self.status.value} inconsistent with {n} parts")

    @property
    def polygon(self) -> Polygon:
        """The single surviving part; only valid when status is intact."""
        if self.status is not OffsetStatus.INTACT:
            raise ValueError(f"offset result is {self.status.value}, not intact")
        return self.parts[0]


def shrink_distance(p: Polygon, r: float) -> float:
    """Shrink distance A*(1-r)/L of a polygon for shrink ratio ``r``."""
    if not (math.isfinite(r) and 0.0 <= r < 1.0):
        raise ValueError(f"shrink ratio must be in [0, 1), got {r}")
    return p.area * (1.0 - r) / p.perimeter


def round_join_segments(radius: float, tolerance: float = ARC_TOLERANCE) -> int:
    """Segments per quarter circle keeping the arc sagitta below ``tolerance``."""
    if radius <= tolerance:
        return 4
    theta = 2.0 * math.acos(max(1.0 - tolerance / radius, -1.0))
    return max(4, math.ceil((math.pi / 2.0) / theta))


def _buffer_args(d: float, join: JoinStyle) -> dict:
    if join == "miter":
        return {"join_style": "mitre", "mitre_limit": _MITRE_LIMIT}
    if join == "round":
        return {"join_style": "round", "quad_segs": round_join_segments(abs(d))}
    raise ValueError(f"join must be 'miter' or 'round', got {join!r}")


def buffer_geometry(geom: BaseGeometry, d: float, join: JoinStyle, s: float = 1.0) -> BaseGeometry:
    """Anisotropic GEOS buffer on a raw shapely geometry (hot-path helper).

    Holes opened or closed by the offset are not stripped here; callers that
    need solid regions take exteriors.
    """
    if s != 1.0:
        geom = affinity.scale(geom, xfact=s, yfact=1.0, origin=(0, 0))
    out = geom.buffer(d, **_buffer_args(d, join))
    if s != 1.0 and not out.is_empty:
        out = affinity.scale(out, xfact=1.0 / s, yfact=1.0, origin=(0, 0))
    return out


def _collect_parts(out: BaseGeometry) -> OffsetResult:
    if out.is_empty:
        return OffsetResult(parts=(), status=OffsetStatus.VANISHED)
    if isinstance(out, _SPolygon):
        geoms = [out]
    elif isinstance(out, MultiPolygon):
        geoms = list(out.geoms)
    else:  # GeometryCollection from exotic inputs: keep polygonal content
        geoms = [g for g in getattr(out, "geoms", []) if isinstance(g, _SPolygon)]
    # interiors are dropped: offsets of solid text regions stay solid
    polys = [
        Polygon._from_valid_ring(np.asarray(g.exterior.coords))
        for g in geoms
        if g.area >= MIN_PART_AREA
    ]
    polys.sort(key=lambda p: (p.bounds[1], p.bounds[0]))
    if not polys:
        return OffsetResult(parts=(), status=OffsetStatus.VANISHED)
    if len(polys) == 1:
        return OffsetResult(parts=(polys[0],), status=OffsetStatus.INTACT)
    return OffsetResult(parts=tuple(polys), status=OffsetStatus.SPLIT)


def offset_uniform(p: Polygon, d: float, join: JoinStyle = "miter") -> OffsetResult:
    """Offset by signed distance ``d`` (negative shrinks, positive expands).

    Inward offsets may split the region into multiple parts or make it vanish;
    the status field reports which. Fragments under ``MIN_PART_AREA`` are
    discarded and counted toward split/vanished.
    """
    if not math.isfinite(d):
        raise ValueError(f"offset distance must be finite, got {d}")
    if d == 0.0:
        return OffsetResult(parts=(p,), status=OffsetStatus.INTACT)
    return _collect_parts(buffer_geometry(p.to_shapely(), d, join))


def offset_stretched(p: Polygon, dy: float, s: float, join: JoinStyle = "miter") -> OffsetResult:
    """Anisotropic offset: |dy| along y, |dy|/s along x (s >= 1).

    With s=1 this is exactly :func:`offset_uniform`. The sign convention
    matches it too: negative ``dy`` shrinks.
    """
    if not (math.isfinite(s) and s >= 1.0):
        raise ValueError(f"stretch ratio must be >= 1, got {s}")
    if not math.isfinite(dy):
        raise ValueError(f"offset distance must be finite, got {dy}")
    if s == 1.0:
        return offset_uniform(p, dy, join)
    if dy == 0.0:
        return OffsetResult(parts=(p,), status=OffsetStatus.INTACT)
    return _collect_parts(buffer_geometry(p.to_shapely(), dy, join, s=s))

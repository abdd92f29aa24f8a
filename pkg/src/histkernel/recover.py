"""Recover full text regions from kernels.

Two routes: a fixed-ratio unclip (expansion distance A'*u/L' of the kernel)
and an iterative expansion that needs no ratio at all. The iteration searches
for the expansion distance d whose recovered region R = expand(kernel, d)
satisfies shrink_distance(R, r) = d, i.e. the region that would have produced
this kernel under target generation. Expansion is always anisotropic in the
same stretched way as shrinking.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from typing import Literal, NamedTuple

import numpy as np
import shapely
from shapely import affinity
from shapely.geometry import MultiPolygon, Polygon as _SPolygon

from .geometry import DegenerateGeometryError, Polygon
from .offset import (
    JoinStyle,
    ShrinkSpec,
    _buffer_args,
    offset_stretched,
    shrink_distance,
)
from .raster import (
    DEFAULT_BINARIZE_THRESHOLD,
    DEFAULT_SIMPLIFY_EPS,
    KernelMap,
    binarize,
    connected_components,
    trace_polygon,
)

DEFAULT_TOLERANCE = 1e-2
DEFAULT_MAX_ITERS = 64


class RecoverySkipWarning(UserWarning):
    """A kernel could not be recovered and was skipped."""


@dataclass(frozen=True)
class RecoveryConfig:
    method: Literal["unclip", "iedp"]
    spec: ShrinkSpec
    u: float | None = None
    tolerance: float = DEFAULT_TOLERANCE
    max_iters: int = DEFAULT_MAX_ITERS

    def __post_init__(self) -> None:
        if self.method not in ("unclip", "iedp"):
            raise ValueError(f"method must be 'unclip' or 'iedp', got {self.method!r}")
        if self.method == "unclip":
            if self.u is None or not (math.isfinite(self.u) and self.u > 1.0):
                raise ValueError(f"unclip needs a ratio u > 1, got {self.u}")
        if not (math.isfinite(self.tolerance) and self.tolerance > 0.0):
            raise ValueError(f"tolerance must be positive, got {self.tolerance}")
        if self.max_iters < 1:
            raise ValueError(f"max_iters must be >= 1, got {self.max_iters}")


class ExpansionStep(NamedTuple):
    d: float
    d_prime: float
    step: float


@dataclass(frozen=True)
class RecoveryTrace:
    iterations: tuple[ExpansionStep, ...]
    converged: bool

    def __post_init__(self) -> None:
        if self.converged:
            last = self.iterations[-1]
            tol_gap = abs(last.d_prime - last.d)
            if not math.isfinite(tol_gap):
                raise ValueError("trace ends on a non-finite gap")

    @property
    def d_applied(self) -> float:
        return self.iterations[-1].d


def unclip(kernel: Polygon, u: float, s: float = 1.0, join: JoinStyle = "miter") -> Polygon:
    """Expand a kernel by D' = A'*u/L' in the stretched way.

    ``u`` may be any positive ratio here (the u -> 0 limit degenerates to the
    kernel itself); configs used for actual recovery require u > 1.
    """
    if not (math.isfinite(u) and u > 0.0):
        raise ValueError(f"unclip ratio must be positive, got {u}")
    d = kernel.area * u / kernel.perimeter
    result = offset_stretched(kernel, +d, s, join)
    return result.polygon


def iterative_expand(
    kernel: Polygon,
    spec: ShrinkSpec,
    tolerance: float = DEFAULT_TOLERANCE,
    max_iters: int = DEFAULT_MAX_ITERS,
    join: JoinStyle = "miter",
    strict_paper: bool = False,
) -> tuple[Polygon, RecoveryTrace]:
    """Find the expansion distance that is a fixed point of the shrink formula.

    Starting from d0 = A'(1-r)/L' of the kernel (exact when kernel == region)
    with step d0/2, the distance moves toward the freshly computed d' of the
    recovered region, halving the step whenever the move direction reverses --
    a bisection-like walk. ``strict_paper`` flips the update direction to the
    printed pseudocode variant (d decreases when d' > d + tolerance), which
    diverges for convex kernels and is provided for comparison only.

    Returns the recovery and a trace of every (d, d', step) evaluation. When
    the iteration budget runs out the best iterate (smallest |d' - d|) is
    returned with ``converged=False``.
    """
    if not (math.isfinite(tolerance) and tolerance > 0.0):
        raise ValueError(f"tolerance must be positive, got {tolerance}")
    if max_iters < 1:
        raise ValueError(f"max_iters must be >= 1, got {max_iters}")

    s, r = spec.s, spec.r
    geom = kernel.to_shapely()
    scaled = affinity.scale(geom, xfact=s, yfact=1.0, origin=(0, 0)) if s != 1.0 else geom
    miter_kwargs = _buffer_args(1.0, "miter") if join == "miter" else None

    def expand(dist: float):
        kwargs = miter_kwargs if miter_kwargs is not None else _buffer_args(dist, join)
        return scaled.buffer(dist, **kwargs)

    inv_s = 1.0 / s
    one_minus_r = 1.0 - r

    def measure(g) -> float:
        """d' of the expansion result, measured in unscaled coordinates."""
        if shapely.get_type_id(g) == 3 and shapely.get_num_interior_rings(g) == 0:
            ring = shapely.get_coordinates(g)  # closed: first vertex repeated last
        else:
            ring = _largest_exterior(g)
        x = ring[:, 0] * inv_s
        y = ring[:, 1]
        dx = np.diff(x)
        dy = np.diff(y)
        perim = float(np.sqrt(dx * dx + dy * dy).sum())
        area = 0.5 * abs(float(x[:-1] @ y[1:] - x[1:] @ y[:-1]))
        return area * one_minus_r / perim

    d = shrink_distance(kernel, r)
    step = d / 2.0
    expanded = expand(d)
    d_prime = measure(expanded)
    steps = [ExpansionStep(d, d_prime, step)]
    best = (abs(d_prime - d), d)
    prev_direction = 0
    iters = 1
    while abs(d_prime - d) > tolerance and iters < max_iters:
        if strict_paper:
            direction = -1 if d_prime > d + tolerance else 1
        else:
            direction = 1 if d_prime > d else -1
        if prev_direction != 0 and direction != prev_direction:
            step /= 2.0
        d = max(d + direction * step, 0.0)
        expanded = expand(d)
        d_prime = measure(expanded)
        steps.append(ExpansionStep(d, d_prime, step))
        if abs(d_prime - d) < best[0]:
            best = (abs(d_prime - d), d)
        prev_direction = direction
        iters += 1

    converged = abs(d_prime - d) <= tolerance
    if not converged and best[1] != d:
        d = best[1]
        expanded = expand(d)
        d_prime = measure(expanded)
        steps.append(ExpansionStep(d, d_prime, step))

    if s != 1.0:
        expanded = affinity.scale(expanded, xfact=1.0 / s, yfact=1.0, origin=(0, 0))
    recovery = Polygon._from_valid_ring(_largest_exterior(expanded))
    return recovery, RecoveryTrace(iterations=tuple(steps), converged=converged)


def _largest_exterior(g) -> np.ndarray:
    """Exterior ring coordinates of the largest polygonal piece."""
    if isinstance(g, _SPolygon):
        return np.asarray(g.exterior.coords)
    if isinstance(g, MultiPolygon):
        biggest = max(g.geoms, key=lambda q: q.area)
        return np.asarray(biggest.exterior.coords)
    raise DegenerateGeometryError(f"expansion produced {g.geom_type or 'nothing'}")


@dataclass(frozen=True)
class KernelRecovery:
    """One recovered kernel with its provenance for reporting."""

    index: int
    polygon: Polygon
    kernel: Polygon
    iterations: int
    converged: bool


def recover_map(
    m: KernelMap,
    cfg: RecoveryConfig,
    binarize_t: float = DEFAULT_BINARIZE_THRESHOLD,
    connectivity: int = 8,
    simplify_eps: float = DEFAULT_SIMPLIFY_EPS,
) -> list[Polygon]:
    """Binarize, extract components, trace kernels, and recover each region."""
    return [rec.polygon for rec in recover_map_detailed(m, cfg, binarize_t, connectivity, simplify_eps)]


def recover_map_detailed(
    m: KernelMap,
    cfg: RecoveryConfig,
    binarize_t: float = DEFAULT_BINARIZE_THRESHOLD,
    connectivity: int = 8,
    simplify_eps: float = DEFAULT_SIMPLIFY_EPS,
) -> list[KernelRecovery]:
    binary = binarize(m, binarize_t) if m.mode == "float" else m
    out: list[KernelRecovery] = []
    for comp in connected_components(binary, connectivity=connectivity):
        try:
            kernel = trace_polygon(comp, simplify_eps=simplify_eps)
            if cfg.method == "unclip":
                poly = unclip(kernel, cfg.u, cfg.spec.s)
                iters, converged = 1, True
            else:
                poly, trace = iterative_expand(
                    kernel, cfg.spec, tolerance=cfg.tolerance, max_iters=cfg.max_iters
                )
                iters, converged = len(trace.iterations), trace.converged
        except DegenerateGeometryError as exc:
            warnings.warn(
                f"component {comp.label} skipped: {exc}", RecoverySkipWarning, stacklevel=2
            )
            continue
        out.append(
            KernelRecovery(
                index=comp.label, polygon=poly, kernel=kernel, iterations=iters, converged=converged
            )
        )
    return out

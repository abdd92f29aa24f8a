"""Independent oracles the tests check the library against.

These deliberately avoid the code paths they verify: areas come from Monte
Carlo point sampling, offsets from distance transforms on fine rasters, and
fixed points from a dense scan plus golden-section refinement.
"""

from __future__ import annotations

import math

import numpy as np
import shapely
from scipy import ndimage

from histkernel.geometry import Polygon
from histkernel.offset import ShrinkSpec, offset_stretched, shrink_distance


def monte_carlo_area(poly: Polygon, n_samples: int = 1_000_000, seed: int = 0) -> float:
    """Point-in-polygon sampling over the bounding box."""
    rng = np.random.default_rng(seed)
    minx, miny, maxx, maxy = poly.bounds
    xs = rng.uniform(minx, maxx, n_samples)
    ys = rng.uniform(miny, maxy, n_samples)
    geom = poly.to_shapely()
    shapely.prepare(geom)
    frac = shapely.contains_xy(geom, xs, ys).mean()
    return float(frac * (maxx - minx) * (maxy - miny))


def _fine_mask(poly: Polygon, grid: float, pad: float) -> tuple[np.ndarray, float, float]:
    minx, miny, maxx, maxy = poly.bounds
    x0, y0 = minx - pad, miny - pad
    w = int(math.ceil((maxx - minx + 2 * pad) / grid)) + 1
    h = int(math.ceil((maxy - miny + 2 * pad) / grid)) + 1
    xs = x0 + (np.arange(w) + 0.5) * grid
    ys = y0 + (np.arange(h) + 0.5) * grid
    xx, yy = np.meshgrid(xs, ys)
    geom = poly.to_shapely()
    shapely.prepare(geom)
    mask = shapely.contains_xy(geom, xx.ravel(), yy.ravel()).reshape(h, w)
    return mask, x0, y0


def elliptical_erosion_parts(
    poly: Polygon, dy: float, s: float, grid: float = 0.05, min_area: float = 1.0
) -> list[float]:
    """Part areas after erosion by the ellipse with semi-axes (dy/s, dy).

    Rasterizes on a fine grid and thresholds the anisotropic distance
    transform, so it shares no machinery with the polygon-offset route.
    """
    mask, _, _ = _fine_mask(poly, grid, pad=2.0)
    edt = ndimage.distance_transform_edt(mask, sampling=(grid / dy, grid / (dy / s)))
    eroded = edt > 1.0
    labels, n = ndimage.label(eroded, structure=np.ones((3, 3)))
    if n == 0:
        return []
    areas = ndimage.sum_labels(eroded, labels, index=range(1, n + 1)) * grid * grid
    return sorted(float(a) for a in areas if a >= min_area)


def elliptical_dilation_area(poly: Polygon, dy: float, s: float, grid: float = 0.05) -> float:
    """Area after dilation by the ellipse with semi-axes (dy/s, dy)."""
    mask, _, _ = _fine_mask(poly, grid, pad=2.0 * dy + 2.0)
    background = ~mask
    edt = ndimage.distance_transform_edt(background, sampling=(grid / dy, grid / (dy / s)))
    dilated = mask | (edt <= 1.0)
    return float(dilated.sum()) * grid * grid


def fixed_point_by_golden_section(
    kernel: Polygon, spec: ShrinkSpec, bracket_hi: float | None = None, tol: float = 1e-6
) -> float:
    """Expansion distance minimizing |d' - d| via scan + golden-section.

    Independent of the stepping loop under test: the objective is evaluated on
    a dense bracket first, then refined by golden-section search.
    """

    def gap(d: float) -> float:
        result = offset_stretched(kernel, +d, spec.s)
        region = max(result.parts, key=lambda p: p.area)
        return abs(shrink_distance(region, spec.r) - d)

    hi = bracket_hi if bracket_hi is not None else 6.0 * shrink_distance(kernel, spec.r) + 1.0
    ds = np.linspace(1e-6, hi, 200)
    gaps = [gap(float(d)) for d in ds]
    i = int(np.argmin(gaps))
    lo, hi = float(ds[max(i - 1, 0)]), float(ds[min(i + 1, len(ds) - 1)])
    phi = (math.sqrt(5.0) - 1.0) / 2.0
    a, b = lo, hi
    c = b - phi * (b - a)
    d_ = a + phi * (b - a)
    fc, fd = gap(c), gap(d_)
    while b - a > tol:
        if fc < fd:
            b, d_, fd = d_, c, fc
            c = b - phi * (b - a)
            fc = gap(c)
        else:
            a, c, fc = c, d_, fd
            d_ = a + phi * (b - a)
            fd = gap(d_)
    return (a + b) / 2.0

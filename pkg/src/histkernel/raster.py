"""Bridge between polygons and pixel grids.

Pixel (row i, col j) covers the unit square [j, j+1) x [i, i+1) and its center
is (j + 0.5, i + 0.5). Rasterization fills pixels whose centers fall inside a
polygon; boundary tracing follows the 0.5-level isoline, which runs half a
pixel outside the foreground centers, i.e. along the pixel-square frontier.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable

import numpy as np
import shapely
from PIL import Image
from scipy import ndimage

from .geometry import DegenerateGeometryError, Polygon

#: Components below this pixel count are discarded as noise by default.
MIN_COMPONENT_AREA = 4

#: Default binarization threshold for predicted kernel maps.
DEFAULT_BINARIZE_THRESHOLD = 0.3

#: Default perpendicular-distance tolerance for contour simplification.
DEFAULT_SIMPLIFY_EPS = 1.0


class KernelMap:
    """A page-resolution raster of kernel probability or binary values.

    ``data`` is (height, width), float32 in [0, 1] for mode ``"float"`` or
    uint8 in {0, 1} for mode ``"binary"``. The array is frozen after
    construction.
    """

    __slots__ = ("width", "height", "data")

    def __init__(self, data: np.ndarray):
        arr = np.asarray(data)
        if arr.ndim != 2:
            raise ValueError(f"kernel map must be 2-D, got shape {arr.shape}")
        if arr.dtype == np.uint8:
            if arr.size and arr.max() > 1:
                raise ValueError("binary kernel map may contain only 0/1")
        else:
            arr = arr.astype(np.float32, copy=True)
            if arr.size and (arr.min() < 0.0 or arr.max() > 1.0):
                raise ValueError("float kernel map values must lie in [0, 1]")
        if not arr.flags.owndata:
            arr = arr.copy()
        arr.setflags(write=False)
        object.__setattr__(self, "data", arr)
        object.__setattr__(self, "height", arr.shape[0])
        object.__setattr__(self, "width", arr.shape[1])

    def __setattr__(self, name, value):  # pragma: no cover - guard rail
        raise AttributeError("KernelMap is immutable")

    @property
    def mode(self) -> str:
        return "binary" if self.data.dtype == np.uint8 else "float"

    @classmethod
    def zeros(cls, width: int, height: int, mode: str = "binary") -> "KernelMap":
        if width <= 0 or height <= 0:
            raise ValueError(f"canvas size must be positive, got {width}x{height}")
        dtype = np.uint8 if mode == "binary" else np.float32
        return cls(np.zeros((height, width), dtype=dtype))

    def foreground_count(self) -> int:
        if self.mode != "binary":
            raise ValueError("foreground count is defined for binary maps")
        return int(self.data.sum())


@dataclass(frozen=True)
class Component:
    """A connected foreground component with deterministic label."""

    label: int
    coords: np.ndarray  # (n, 2) rows of (row, col), sorted row-major
    bbox: tuple[int, int, int, int]  # (row0, col0, row1, col1), exclusive high

    @property
    def pixel_count(self) -> int:
        return len(self.coords)

    @property
    def pixels(self) -> set[tuple[int, int]]:
        return {(int(r), int(c)) for r, c in self.coords}


def rasterize(polys: Iterable[Polygon], width: int, height: int) -> KernelMap:
    """Scanline fill of polygons into one binary map (pixel-center rule)."""
    if width <= 0 or height <= 0:
        raise ValueError(f"canvas size must be positive, got {width}x{height}")
    canvas = np.zeros((height, width), dtype=bool)
    for poly in polys:
        geom = poly.to_shapely()
        minx, miny, maxx, maxy = geom.bounds
        c0 = max(0, int(math.floor(minx - 0.5)))
        c1 = min(width, int(math.ceil(maxx + 0.5)))
        r0 = max(0, int(math.floor(miny - 0.5)))
        r1 = min(height, int(math.ceil(maxy + 0.5)))
        if c0 >= c1 or r0 >= r1:
            continue
        xs = np.arange(c0, c1, dtype=float) + 0.5
        ys = np.arange(r0, r1, dtype=float) + 0.5
        xx, yy = np.meshgrid(xs, ys)
        shapely.prepare(geom)
        inside = shapely.contains_xy(geom, xx.ravel(), yy.ravel()).reshape(yy.shape)
        canvas[r0:r1, c0:c1] |= inside
    return KernelMap(canvas.astype(np.uint8))


def binarize(m: KernelMap, t: float) -> KernelMap:
    """Threshold a float map: pixel >= t becomes 1, else 0."""
    if m.mode != "float":
        raise ValueError("binarize expects a float-mode map")
    if not (0.0 < t < 1.0):
        raise ValueError(f"threshold must lie in (0, 1), got {t}")
    return KernelMap((m.data >= t).astype(np.uint8))


def connected_components(
    m: KernelMap, connectivity: int = 8, min_area: int = MIN_COMPONENT_AREA
) -> list[Component]:
    """Label foreground components, ordered by first pixel in row-major scan.

    Components with fewer than ``min_area`` pixels are dropped (single-pixel
    specks break polygon tracing); pass ``min_area=1`` to keep everything.
    """
    if m.mode != "binary":
        raise ValueError("connected components expect a binary map")
    if connectivity not in (4, 8):
        raise ValueError(f"connectivity must be 4 or 8, got {connectivity}")
    structure = np.ones((3, 3), dtype=int) if connectivity == 8 else None
    labels, n = ndimage.label(m.data, structure=structure)
    if n == 0:
        return []
    # deterministic order: by smallest row-major flat index of each component
    flat = labels.ravel()
    fg = np.flatnonzero(flat)
    order = {}
    for pos in fg:
        lab = flat[pos]
        if lab not in order:
            order[lab] = pos
            if len(order) == n:
                break
    ranked = sorted(order, key=order.get)
    out: list[Component] = []
    slices = ndimage.find_objects(labels)
    for new_label, lab in enumerate(ranked, start=1):
        sl = slices[lab - 1]
        local = np.argwhere(labels[sl] == lab)
        if len(local) < min_area:
            continue
        coords = local + (sl[0].start, sl[1].start)
        bbox = (sl[0].start, sl[1].start, sl[0].stop, sl[1].stop)
        out.append(Component(label=len(out) + 1, coords=coords, bbox=bbox))
    return out


def trace_polygon(c: Component, simplify_eps: float = DEFAULT_SIMPLIFY_EPS) -> Polygon:
    """Trace the outer boundary of a component and simplify it.

    Border following walks the cracks between foreground and background,
    emitting exact lattice corners (the boundary of the union of pixel
    squares), then simplifies by perpendicular-distance tolerance
    ``simplify_eps``. The ring covers the 4-connected blob containing the
    component's first pixel; a simple polygon cannot include pixels attached
    only through a diagonal corner.
    """
    if c.pixel_count < 2:
        raise DegenerateGeometryError("cannot trace a single-pixel component")
    r0, c0, r1, c1 = c.bbox
    mask = np.zeros((r1 - r0 + 2, c1 - c0 + 2), dtype=bool)
    mask[c.coords[:, 0] - r0 + 1, c.coords[:, 1] - c0 + 1] = True
    ring = _follow_cracks(mask)
    ring = ring + np.array([c0 - 1, r0 - 1], dtype=float)
    try:
        geom = shapely.geometry.Polygon(ring)
        if simplify_eps > 0.0:
            geom = geom.simplify(simplify_eps, preserve_topology=True)
        return Polygon.from_shapely(geom)
    except (ValueError, DegenerateGeometryError) as exc:
        raise DegenerateGeometryError(f"component boundary is degenerate: {exc}") from exc


def _follow_cracks(mask: np.ndarray) -> np.ndarray:
    """Outer boundary of the first (row-major) 4-connected blob in ``mask``.

    Walks lattice corners keeping foreground on the right of travel and
    records direction changes. Returned points are (x, y) = (col, row) lattice
    coordinates; pixel (r, c) spans [c, c+1] x [r, r+1].
    """
    rows, cols = np.nonzero(mask)
    start_r, start_c = int(rows[0]), int(cols[0])

    def fg(r: int, cc: int) -> bool:
        return 0 <= r < mask.shape[0] and 0 <= cc < mask.shape[1] and bool(mask[r, cc])

    def is_boundary(px: int, py: int, dx: int, dy: int) -> bool:
        # pixels flanking the crack from (px, py) toward (px+dx, py+dy);
        # right-of-travel must be foreground, left background (y grows down)
        if dx == 1:
            right, left = (py, px), (py - 1, px)
        elif dx == -1:
            right, left = (py - 1, px - 1), (py, px - 1)
        elif dy == 1:
            right, left = (py, px - 1), (py, px)
        else:
            right, left = (py - 1, px), (py - 1, px - 1)
        return fg(*right) and not fg(*left)

    # top edge of the first pixel, walking +x with the pixel on the right
    sx, sy, sdx, sdy = start_c, start_r, 1, 0
    points = [(float(sx), float(sy))]
    px, py, dx, dy = sx, sy, sdx, sdy
    max_steps = 4 * mask.size + 4
    for _ in range(max_steps):
        px, py = px + dx, py + dy
        # prefer left turn, then straight, then right, then reverse
        for ndx, ndy in ((dy, -dx), (dx, dy), (-dy, dx), (-dx, -dy)):
            if is_boundary(px, py, ndx, ndy):
                if (ndx, ndy) != (dx, dy):
                    points.append((float(px), float(py)))
                dx, dy = ndx, ndy
                break
        else:  # pragma: no cover - cannot happen on a valid mask
            raise DegenerateGeometryError("boundary walk lost the contour")
        if (px, py, dx, dy) == (sx, sy, sdx, sdy):
            break
    else:  # pragma: no cover - guard against runaway walks
        raise DegenerateGeometryError("boundary walk did not close")
    return np.asarray(points, dtype=float)


# ---------------------------------------------------------------------------
# File IO: 8-bit PGM (P5) and PNG grayscale; float maps as 16-bit PNG.
# ---------------------------------------------------------------------------


def write_pgm(m: KernelMap, path: str | Path, comment: str | None = None) -> None:
    if m.mode != "binary":
        raise ValueError("PGM output is defined for binary maps")
    lines = [b"P5"]
    if comment:
        for part in comment.splitlines():
            lines.append(b"# " + part.encode("utf-8"))
    lines.append(f"{m.width} {m.height}".encode())
    lines.append(b"255")
    header = b"\n".join(lines) + b"\n"
    payload = (m.data * 255).astype(np.uint8).tobytes()
    Path(path).write_bytes(header + payload)


def read_pgm(path: str | Path) -> KernelMap:
    blob = Path(path).read_bytes()
    if not blob.startswith(b"P5"):
        raise ValueError(f"{path}: not a binary PGM (P5) file")
    tokens: list[int] = []
    pos = 2
    while len(tokens) < 3:
        match = re.compile(rb"\s*(?:#[^\n]*\n|(\d+))").match(blob, pos)
        if match is None:
            raise ValueError(f"{path}: malformed PGM header")
        pos = match.end()
        if match.group(1) is not None:
            tokens.append(int(match.group(1)))
    width, height, maxval = tokens
    pos += 1  # single whitespace after maxval
    data = np.frombuffer(blob, dtype=np.uint8, count=width * height, offset=pos)
    return KernelMap((data.reshape(height, width) > maxval // 2).astype(np.uint8))


def write_png(m: KernelMap, path: str | Path) -> None:
    """Binary maps as 8-bit grayscale {0, 255}; float maps as 16-bit."""
    if m.mode == "binary":
        img = Image.fromarray((m.data * 255).astype(np.uint8), mode="L")
    else:
        img = Image.fromarray(np.round(m.data * 65535.0).astype(np.uint16))
    img.save(Path(path), format="PNG")


def read_png(path: str | Path) -> KernelMap:
    img = Image.open(Path(path))
    arr = np.asarray(img)
    if arr.dtype == np.uint8:
        return KernelMap((arr > 127).astype(np.uint8))
    if arr.dtype in (np.uint16, np.int32):
        return KernelMap((arr.astype(np.float64) / 65535.0).astype(np.float32))
    raise ValueError(f"{path}: unsupported PNG pixel type {arr.dtype}")

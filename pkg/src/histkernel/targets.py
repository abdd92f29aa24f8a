"""Training-target generation: shrink annotated lines into kernel polygons.

The shrink distance for a line comes from its full polygon (D = A*(1-r)/L) and
is applied anisotropically: for vertical text the x-direction shrinks by only
D/s. Kernels that split are treated as generation failures and excluded from
the kernel map; kernels that vanish mark the instance ignore.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, replace
from typing import Literal

import shapely

from .geometry import DegenerateGeometryError, Polygon, transpose
from .offset import OffsetResult, OffsetStatus, ShrinkSpec, offset_stretched, shrink_distance
from .raster import KernelMap, rasterize

Direction = Literal["vertical", "horizontal"]


class KernelOverlapWarning(UserWarning):
    """Two generated kernels overlap; disjointness of targets is violated."""


class KernelGenerationWarning(UserWarning):
    """An instance could not produce a kernel and was skipped."""


@dataclass(frozen=True)
class TextInstance:
    """An annotated text line: polygon plus identity and handling flags."""

    polygon: Polygon
    id: str
    direction: Direction = "vertical"
    ignore: bool = False

    def __post_init__(self) -> None:
        if self.direction not in ("vertical", "horizontal"):
            raise ValueError(f"direction must be 'vertical' or 'horizontal', got {self.direction!r}")


@dataclass(frozen=True)
class Page:
    width: int
    height: int
    instances: tuple[TextInstance, ...]
    id: str = "page-0"

    def __post_init__(self) -> None:
        if self.width <= 0 or self.height <= 0:
            raise ValueError(f"page size must be positive, got {self.width}x{self.height}")
        seen: set[str] = set()
        for inst in self.instances:
            if inst.id in seen:
                raise ValueError(f"duplicate instance id {inst.id!r}")
            seen.add(inst.id)
            minx, miny, maxx, maxy = inst.polygon.bounds
            if minx < -1e-6 or miny < -1e-6 or maxx > self.width + 1e-6 or maxy > self.height + 1e-6:
                raise ValueError(
                    f"instance {inst.id!r} exceeds page bounds: "
                    f"({minx:.2f},{miny:.2f},{maxx:.2f},{maxy:.2f}) vs {self.width}x{self.height}"
                )


@dataclass(frozen=True)
class KernelTarget:
    instance_id: str
    kernel: OffsetResult
    distance: float  # the applied shrink distance D = A*(1-r)/L of the source


def generate_kernel(inst: TextInstance, spec: ShrinkSpec) -> KernelTarget:
    """Shrink one instance into its kernel using the instance's full-polygon D.

    Horizontal instances transpose the anisotropy axis: their y-direction
    shrink is the one reduced by 1/s.
    """
    d = shrink_distance(inst.polygon, spec.r)
    if inst.direction == "horizontal":
        result = offset_stretched(transpose(inst.polygon), -d, spec.s)
        result = OffsetResult(
            parts=tuple(transpose(part) for part in result.parts), status=result.status
        )
    else:
        result = offset_stretched(inst.polygon, -d, spec.s)
    return KernelTarget(instance_id=inst.id, kernel=result, distance=d)


def generate_page_targets(
    page: Page, spec: ShrinkSpec
) -> tuple[list[KernelTarget], KernelMap]:
    """Generate kernels for every non-ignored instance and rasterize the map.

    Only intact kernels enter the binary map; split kernels are excluded (the
    instance failed target generation) and vanished kernels leave nothing.
    Kernel generation is pure per instance; instances are processed in id
    order so the result is independent of any execution interleaving.
    Overlapping kernel pairs are reported through ``KernelOverlapWarning``.
    """
    targets: list[KernelTarget] = []
    intact: list[tuple[str, Polygon]] = []
    for inst in sorted(page.instances, key=lambda i: i.id):
        if inst.ignore:
            continue
        try:
            target = generate_kernel(inst, spec)
        except DegenerateGeometryError as exc:
            warnings.warn(
                f"instance {inst.id!r} skipped: {exc}", KernelGenerationWarning, stacklevel=2
            )
            continue
        targets.append(target)
        if target.kernel.status is OffsetStatus.INTACT:
            intact.append((inst.id, target.kernel.polygon))
    _warn_overlaps(intact)
    kernel_map = rasterize([poly for _, poly in intact], page.width, page.height)
    return targets, kernel_map


def _warn_overlaps(intact: list[tuple[str, Polygon]]) -> None:
    if len(intact) < 2:
        return
    geoms = [poly.to_shapely() for _, poly in intact]
    tree = shapely.STRtree(geoms)
    reported: set[tuple[int, int]] = set()
    for i, geom in enumerate(geoms):
        for j in tree.query(geom, predicate="intersects"):
            j = int(j)
            if j == i:
                continue
            key = (min(i, j), max(i, j))
            if key in reported:
                continue
            if geoms[i].intersection(geoms[j]).area > 0.0:
                reported.add(key)
    for i, j in sorted(reported):
        warnings.warn(
            f"kernels overlap: {intact[i][0]!r} and {intact[j][0]!r}",
            KernelOverlapWarning,
            stacklevel=3,
        )


def mark_vanished_ignored(page: Page, targets: list[KernelTarget]) -> Page:
    """Return a page where instances whose kernel vanished are flagged ignore.

    Keeps evaluation symmetric: lines that produce no supervision signal are
    not counted against recall either.
    """
    vanished = {t.instance_id for t in targets if t.kernel.status is OffsetStatus.VANISHED}
    if not vanished:
        return page
    instances = tuple(
        replace(inst, ignore=True) if inst.id in vanished else inst for inst in page.instances
    )
    return Page(width=page.width, height=page.height, instances=instances, id=page.id)

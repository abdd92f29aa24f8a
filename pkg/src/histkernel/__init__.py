"""Geometric core for dense vertical text-line detection experiments.

Anisotropic kernel-target generation, fixed-point kernel recovery,
rasterization and extraction, IoU-based evaluation, and a deterministic
synthetic-page generator.
"""

__version__ = "0.1.0"

from .geometry import (
    ClippingError,
    DegenerateGeometryError,
    GeometryError,
    Point,
    Polygon,
    UnsupportedAnnotationError,
    aspect_ratio,
    decompose_sides,
    polygon_area,
    polygon_iou,
    polygon_perimeter,
    scale_x,
    text_aspect_ratio,
)
from .offset import (
    OffsetResult,
    OffsetStatus,
    ShrinkSpec,
    offset_stretched,
    offset_uniform,
    shrink_distance,
)
from .raster import KernelMap, binarize, connected_components, rasterize, trace_polygon
from .recover import RecoveryConfig, RecoveryTrace, iterative_expand, recover_map, unclip
from .synth import PackingError, SynthConfig, bent_line_polygon, synth_corpus, synth_line, synth_page
from .targets import KernelTarget, Page, TextInstance, generate_kernel, generate_page_targets

__all__ = [
    "__version__",
    "ClippingError",
    "DegenerateGeometryError",
    "GeometryError",
    "Point",
    "Polygon",
    "UnsupportedAnnotationError",
    "aspect_ratio",
    "decompose_sides",
    "polygon_area",
    "polygon_iou",
    "polygon_perimeter",
    "scale_x",
    "text_aspect_ratio",
    "OffsetResult",
    "OffsetStatus",
    "ShrinkSpec",
    "offset_stretched",
    "offset_uniform",
    "shrink_distance",
    "KernelMap",
    "binarize",
    "connected_components",
    "rasterize",
    "trace_polygon",
    "RecoveryConfig",
    "RecoveryTrace",
    "iterative_expand",
    "recover_map",
    "unclip",
    "PackingError",
    "SynthConfig",
    "bent_line_polygon",
    "synth_corpus",
    "synth_line",
    "synth_page",
    "KernelTarget",
    "Page",
    "TextInstance",
    "generate_kernel",
    "generate_page_targets",
]

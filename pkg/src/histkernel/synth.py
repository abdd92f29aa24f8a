"""Deterministic synthetic pages shaped like dense vertical-text documents.

Lines are deformed rectangles built around a sinusoidal centerline
``x(t) = x0 + a*sin(2*pi*t/T + phi)`` sampled at a fixed number of levels and
offset +-w/2 horizontally. With amplitude 0 they degenerate to exact
rectangles. The phase term lets bends sit anywhere along the line instead of
always anchoring an inflection at the top end.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from .geometry import Polygon, rotate
from .targets import Page, TextInstance


class PackingError(Exception):
    """The configured columns and widths cannot fit on the page."""


@dataclass(frozen=True)
class SynthConfig:
    page_size: tuple[int, int] = (1000, 1000)
    columns: int = 8
    line_width_range: tuple[float, float] = (14.0, 22.0)
    line_height_range: tuple[float, float] = (80.0, 360.0)
    gap_range: tuple[float, float] = (6.0, 14.0)
    bend_amplitude_range: tuple[float, float] = (0.0, 6.0)
    bend_period_range: tuple[float, float] = (90.0, 320.0)
    bend_phase_range: tuple[float, float] = (0.0, 2.0 * math.pi)
    rotation_range: tuple[float, float] = (0.0, 0.0)  # degrees
    annotation_points: int = 16
    seed: int = 0

    def __post_init__(self) -> None:
        w, h = self.page_size
        if w <= 0 or h <= 0:
            raise ValueError(f"page size must be positive, got {self.page_size}")
        if self.columns < 1:
            raise ValueError("need at least one column")
        for name in ("line_width_range", "line_height_range", "gap_range",
                     "bend_amplitude_range", "bend_period_range", "bend_phase_range"):
            lo, hi = getattr(self, name)
            if not (math.isfinite(lo) and math.isfinite(hi)) or hi < lo:
                raise ValueError(f"{name} must be a non-empty finite range, got ({lo}, {hi})")
        if self.line_width_range[0] <= 0 or self.line_height_range[0] <= 0:
            raise ValueError("line widths and heights must be positive")
        if self.bend_amplitude_range[0] < 0 or self.bend_period_range[0] <= 0:
            raise ValueError("bend amplitude must be >= 0 and period > 0")
        if self.gap_range[0] < 1.0:
            raise ValueError("gaps must be at least 1 px")
        lo, hi = self.rotation_range
        if hi < lo:
            raise ValueError(f"rotation_range must be ordered, got ({lo}, {hi})")
        if self.annotation_points not in (4, 16):
            raise ValueError(f"annotation_points must be 4 or 16, got {self.annotation_points}")


def bent_line_polygon(
    width: float,
    height: float,
    amplitude: float = 0.0,
    period: float = 100.0,
    phase: float = 0.0,
    points: int = 16,
    x0: float = 0.0,
    y0: float = 0.0,
) -> Polygon:
    """Deformed rectangle around a sinusoidal centerline.

    The centerline runs from (x0, y0) down to (x0, y0 + height), sampled at
    ``points/2`` levels; each level contributes a left and right vertex at
    horizontal offset +-width/2. The ring is emitted right-side-down then
    left-side-up, which already has positive shoelace area, so the control-run
    layout (two opposite polylines) survives construction untouched. These
    bands are monotone in t and therefore always simple.
    """
    if points % 2 != 0 or points < 4:
        raise ValueError(f"points must be an even count >= 4, got {points}")
    levels = points // 2
    t = np.linspace(0.0, height, levels)
    x = x0 + amplitude * np.sin(2.0 * math.pi * t / period + phase)
    y = y0 + t
    right = np.column_stack([x + width / 2.0, y])
    left = np.column_stack([x - width / 2.0, y])
    ring = np.concatenate([right, left[::-1]], axis=0)
    return Polygon(ring)


@dataclass
class _LineSampler:
    cfg: SynthConfig
    rng: np.random.Generator

    def sample(self, x0: float, y0: float, max_height: float) -> Polygon | None:
        c = self.cfg
        if max_height < c.line_height_range[0]:
            return None
        w = self.rng.uniform(*c.line_width_range)
        h = self.rng.uniform(c.line_height_range[0], min(c.line_height_range[1], max_height))
        a = self.rng.uniform(*c.bend_amplitude_range)
        period = self.rng.uniform(*c.bend_period_range)
        phase = self.rng.uniform(*c.bend_phase_range)
        return bent_line_polygon(w, h, a, period, phase, c.annotation_points, x0=x0, y0=y0)


def synth_line(cfg: SynthConfig, rng: np.random.Generator, instance_id: str = "line-0") -> TextInstance:
    """Sample one vertical line at the origin column (mainly for tests)."""
    poly = _LineSampler(cfg, rng).sample(
        x0=cfg.line_width_range[1] / 2.0 + cfg.bend_amplitude_range[1],
        y0=0.0,
        max_height=cfg.line_height_range[1],
    )
    assert poly is not None
    return TextInstance(polygon=poly, id=instance_id)


def synth_page(cfg: SynthConfig, page_id: str = "page-0") -> Page:
    """Deterministically pack columns of non-overlapping lines onto one page.

    The same config (including seed) always produces the identical page. An
    optional whole-page rotation, sampled from ``rotation_range``, is applied
    to all polygons about the page center; the packing region is pre-shrunk so
    rotated content stays in bounds.
    """
    rng = np.random.default_rng(cfg.seed)
    width, height = cfg.page_size

    max_rot = math.radians(max(abs(cfg.rotation_range[0]), abs(cfg.rotation_range[1])))
    cos_r, sin_r = math.cos(max_rot), math.sin(max_rot)
    shrink = min(
        width / (width * cos_r + height * sin_r),
        height / (width * sin_r + height * cos_r),
    )
    content_w = width * shrink
    content_h = height * shrink
    left = (width - content_w) / 2.0
    top = (height - content_h) / 2.0

    slot_w = cfg.line_width_range[1] + 2.0 * cfg.bend_amplitude_range[1]
    gaps = rng.uniform(*cfg.gap_range, size=cfg.columns + 1)
    needed = cfg.columns * slot_w + float(gaps.sum())
    if needed > content_w:
        raise PackingError(
            f"{cfg.columns} columns of slot width {slot_w:.1f} px need {needed:.1f} px, "
            f"page offers {content_w:.1f}"
        )

    sampler = _LineSampler(cfg, rng)
    polys: list[Polygon] = []
    x = left + gaps[0] + slot_w / 2.0
    for col in range(cfg.columns):
        y = top + rng.uniform(*cfg.gap_range)
        while True:
            room = (top + content_h) - y
            poly = sampler.sample(x0=x, y0=y, max_height=room)
            if poly is None:
                break
            polys.append(poly)
            _, _, _, maxy = poly.bounds
            y = maxy + rng.uniform(*cfg.gap_range)
        x += slot_w + gaps[col + 1]

    angle = rng.uniform(*cfg.rotation_range) if max_rot > 0.0 else 0.0
    if angle != 0.0:
        center = (width / 2.0, height / 2.0)
        polys = [rotate(p, angle, center) for p in polys]

    instances = tuple(
        TextInstance(polygon=p, id=f"{page_id}-l{i:03d}") for i, p in enumerate(polys)
    )
    return Page(width=width, height=height, instances=instances, id=page_id)


def synth_corpus(cfg: SynthConfig, n_pages: int) -> list[Page]:
    """A reproducible multi-page corpus with per-page derived seeds."""
    if n_pages < 1:
        raise ValueError("need at least one page")
    children = np.random.SeedSequence(cfg.seed).spawn(n_pages)
    pages = []
    for i, seq in enumerate(children):
        page_cfg = replace(cfg, seed=int(seq.generate_state(1)[0]))
        pages.append(synth_page(page_cfg, page_id=f"page-{i:04d}"))
    return pages

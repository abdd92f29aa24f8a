"""Detection evaluation: IoU matching, P/R/F, and aspect-ratio breakdowns."""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from typing import Iterable, NamedTuple, Sequence

import shapely

from .geometry import ClippingError, Polygon, polygon_iou, text_aspect_ratio, aspect_ratio
from .offset import OffsetStatus, ShrinkSpec
from .recover import DEFAULT_MAX_ITERS, DEFAULT_TOLERANCE, iterative_expand, unclip
from .targets import TextInstance, generate_kernel

#: Default aspect-ratio bucket edges; the final bucket is [20, inf).
DEFAULT_BUCKET_EDGES = (1.0, 2.0, 5.0, 10.0, 20.0)


@dataclass(frozen=True)
class MatchResult:
    pairs: tuple[tuple[str, int, float], ...]  # (gt_id, pred_index, iou)
    unmatched_gt: tuple[str, ...]
    unmatched_pred: tuple[int, ...]
    n_scored_preds: int
    n_scored_gts: int
    threshold: float


@dataclass(frozen=True)
class EvalReport:
    precision: float
    recall: float
    f_measure: float
    threshold: float
    n_matches: int
    n_pred: int
    n_gt: int


@dataclass(frozen=True)
class BucketReport:
    # rows of (ratio_lo, ratio_hi, mean_iou, count); contiguous and ordered
    buckets: tuple[tuple[float, float, float, int], ...]
    overflow: tuple[float, int]


class SweepRecord(NamedTuple):
    instance_id: str
    text_aspect_ratio: float
    method: str  # "unclip" or "iedp"
    u: float | None  # None for the iterative method
    iou: float | None  # None when the kernel split or vanished
    iterations: int


def _pairwise_ious(
    preds: Sequence[Polygon], gts: Sequence[TextInstance], threshold: float
) -> list[tuple[float, int, int]]:
    """(iou, gt_index, pred_index) for every pair above threshold."""
    if not preds or not gts:
        return []
    tree = shapely.STRtree([p.to_shapely() for p in preds])
    out = []
    for gi, gt in enumerate(gts):
        geom = gt.polygon.to_shapely()
        for pi in tree.query(geom, predicate="intersects"):
            pi = int(pi)
            try:
                iou = polygon_iou(preds[pi], gt.polygon)
            except ClippingError as exc:
                warnings.warn(f"IoU failed for pred {pi} vs gt {gt.id}: {exc}", stacklevel=3)
                continue
            if iou >= threshold:
                out.append((iou, gi, pi))
    return out


def match_detections(
    preds: Sequence[Polygon], gts: Sequence[TextInstance], iou_threshold: float = 0.5
) -> MatchResult:
    """Greedy one-to-one matching in descending IoU order.

    Ties break on (gt id, pred index) so permuting prediction order cannot
    change the outcome. Ignore-flagged ground truths do not score: they absorb
    at most one prediction each, and such predictions are excluded from the
    precision denominator.
    """
    if not (0.0 < iou_threshold < 1.0):
        raise ValueError(f"IoU threshold must lie in (0, 1), got {iou_threshold}")
    candidates = _pairwise_ious(preds, gts, iou_threshold)
    candidates.sort(key=lambda t: (-t[0], gts[t[1]].id, t[2]))
    matched_gt: set[int] = set()
    matched_pred: set[int] = set()
    pairs: list[tuple[str, int, float]] = []
    absorbed_preds: set[int] = set()
    for iou, gi, pi in candidates:
        if gi in matched_gt or pi in matched_pred:
            continue
        matched_gt.add(gi)
        matched_pred.add(pi)
        if gts[gi].ignore:
            absorbed_preds.add(pi)
        else:
            pairs.append((gts[gi].id, pi, iou))
    scored_gts = [g for g in gts if not g.ignore]
    unmatched_gt = tuple(
        g.id for gi, g in enumerate(gts) if not g.ignore and gi not in matched_gt
    )
    unmatched_pred = tuple(
        pi for pi in range(len(preds)) if pi not in matched_pred and pi not in absorbed_preds
    )
    return MatchResult(
        pairs=tuple(pairs),
        unmatched_gt=unmatched_gt,
        unmatched_pred=unmatched_pred,
        n_scored_preds=len(preds) - len(absorbed_preds),
        n_scored_gts=len(scored_gts),
        threshold=iou_threshold,
    )


def prf(m: MatchResult, n_pred: int | None = None, n_gt: int | None = None) -> EvalReport:
    """Precision/recall/F from a match result.

    Empty sets follow the vacuous convention (P=1 with no predictions, R=1
    with no ground truth) so empty pages aggregate cleanly.
    """
    n_pred = m.n_scored_preds if n_pred is None else n_pred
    n_gt = m.n_scored_gts if n_gt is None else n_gt
    matches = len(m.pairs)
    if matches > min(n_pred if n_pred else 0, n_gt if n_gt else 0) and (n_pred or n_gt):
        raise ValueError(f"{matches} matches inconsistent with n_pred={n_pred}, n_gt={n_gt}")
    precision = 1.0 if n_pred == 0 else matches / n_pred
    recall = 1.0 if n_gt == 0 else matches / n_gt
    f = 0.0 if precision + recall == 0.0 else 2.0 * precision * recall / (precision + recall)
    return EvalReport(
        precision=precision,
        recall=recall,
        f_measure=f,
        threshold=m.threshold,
        n_matches=matches,
        n_pred=n_pred,
        n_gt=n_gt,
    )


def recovery_iou_sweep(
    instances: Iterable[TextInstance],
    spec: ShrinkSpec,
    u_grid: Sequence[float],
    include_iterative: bool = False,
    tolerance: float = DEFAULT_TOLERANCE,
    max_iters: int = DEFAULT_MAX_ITERS,
) -> list[SweepRecord]:
    """Kernel-recovery IoU for each instance across a grid of unclip ratios.

    Each instance is shrunk once under ``spec``; every ratio in ``u_grid``
    then unclips that kernel and the IoU against the source line is recorded.
    Instances whose kernel splits or vanishes appear with ``iou=None``. With
    ``include_iterative`` an extra row per instance reports the ratio-free
    iterative recovery.
    """
    records: list[SweepRecord] = []
    for inst in instances:
        ratio = text_aspect_ratio(inst.polygon, inst.direction)
        target = generate_kernel(inst, spec)
        if target.kernel.status is not OffsetStatus.INTACT:
            for u in u_grid:
                records.append(SweepRecord(inst.id, ratio, "unclip", float(u), None, 0))
            if include_iterative:
                records.append(SweepRecord(inst.id, ratio, "iedp", None, None, 0))
            continue
        kernel = target.kernel.polygon
        for u in u_grid:
            recovered = unclip(kernel, float(u), spec.s)
            iou = polygon_iou(recovered, inst.polygon)
            records.append(SweepRecord(inst.id, ratio, "unclip", float(u), iou, 1))
        if include_iterative:
            recovered, trace = iterative_expand(
                kernel, spec, tolerance=tolerance, max_iters=max_iters
            )
            iou = polygon_iou(recovered, inst.polygon)
            records.append(
                SweepRecord(inst.id, ratio, "iedp", None, iou, len(trace.iterations))
            )
    return records


def bucketed_iou(
    records: Iterable[tuple[float, float]], bucket_edges: Sequence[float] = DEFAULT_BUCKET_EDGES
) -> BucketReport:
    """Mean IoU and count per half-open aspect-ratio bucket [lo, hi).

    The final edge extends to infinity. Records outside every bucket (ratios
    below the first edge) land in the overflow bucket.
    """
    edges = [float(e) for e in bucket_edges]
    if len(edges) < 1 or any(b <= a for a, b in zip(edges, edges[1:])):
        raise ValueError(f"bucket edges must be strictly increasing, got {bucket_edges}")
    bounds = list(zip(edges, edges[1:] + [math.inf]))
    sums = [0.0] * len(bounds)
    counts = [0] * len(bounds)
    overflow_sum, overflow_count = 0.0, 0
    for ratio, iou in records:
        for i, (lo, hi) in enumerate(bounds):
            if lo <= ratio < hi:
                sums[i] += iou
                counts[i] += 1
                break
        else:
            overflow_sum += iou
            overflow_count += 1
    buckets = tuple(
        (lo, hi, (sums[i] / counts[i]) if counts[i] else 0.0, counts[i])
        for i, (lo, hi) in enumerate(bounds)
    )
    overflow = ((overflow_sum / overflow_count) if overflow_count else 0.0, overflow_count)
    return BucketReport(buckets=buckets, overflow=overflow)


def aspect_histogram(
    instances: Iterable[TextInstance], bin_edges: Sequence[float]
) -> list[tuple[float, float, int]]:
    """Counts of the polyline-length aspect ratio per half-open bin."""
    edges = [float(e) for e in bin_edges]
    if len(edges) < 2 or any(b <= a for a, b in zip(edges, edges[1:])):
        raise ValueError(f"bin edges must be strictly increasing, got {bin_edges}")
    counts = [0] * (len(edges) - 1)
    for inst in instances:
        ratio = aspect_ratio(inst.polygon)
        for i in range(len(edges) - 1):
            if edges[i] <= ratio < edges[i + 1]:
                counts[i] += 1
                break
    return [(edges[i], edges[i + 1], counts[i]) for i in range(len(counts))]

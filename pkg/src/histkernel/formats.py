"""Stable on-disk formats: annotation JSON, sweep CSV, and metadata blocks.

Annotation files hold pages of instances with point lists; recovery output
reuses the same schema so predictions and ground truth load through one code
path. Every file written by the CLI carries a metadata block (JSON key
``meta``, or a leading ``#`` comment line for CSV/PGM) recording tool version,
seed, and the full parameter set.
"""

from __future__ import annotations

import csv
import io
import json
import os
import tempfile
from pathlib import Path
from typing import Any, Iterable, Mapping, Sequence

import numpy as np

from . import __version__
from .evaluate import SweepRecord
from .geometry import GeometryError, Polygon
from .targets import Page, TextInstance


class SchemaError(ValueError):
    """An input file does not match the expected schema."""

    def __init__(self, path: str | Path, message: str):
        super().__init__(f"{path}: {message}")
        self.path = str(path)


def metadata_block(seed: int | None = None, **params: Any) -> dict[str, Any]:
    meta: dict[str, Any] = {"tool": "histkernel", "version": __version__}
    if seed is not None:
        meta["seed"] = seed
    if params:
        meta["params"] = params
    return meta


def atomic_write_text(path: str | Path, text: str) -> None:
    path = Path(path)
    fd, tmp = tempfile.mkstemp(dir=path.parent or Path("."), prefix=f".{path.name}.")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def atomic_write_bytes(path: str | Path, payload: bytes) -> None:
    path = Path(path)
    fd, tmp = tempfile.mkstemp(dir=path.parent or Path("."), prefix=f".{path.name}.")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(payload)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


# ---------------------------------------------------------------------------
# Annotation JSON
# ---------------------------------------------------------------------------


def pages_to_json(pages: Sequence[Page], meta: Mapping[str, Any]) -> str:
    doc = {
        "meta": dict(meta),
        "pages": [
            {
                "id": page.id,
                "width": page.width,
                "height": page.height,
                "instances": [
                    {
                        "id": inst.id,
                        "points": [[float(x), float(y)] for x, y in inst.polygon.vertices],
                        "direction": inst.direction,
                        "ignore": inst.ignore,
                    }
                    for inst in page.instances
                ],
            }
            for page in pages
        ],
    }
    return json.dumps(doc, indent=2, sort_keys=False) + "\n"


def load_pages(path: str | Path, clamp: bool = True) -> list[Page]:
    """Load pages, clamping instance polygons into the page box.

    Instances whose polygon collapses under clamping raise a
    :class:`SchemaError` naming the offending instance.
    """
    try:
        doc = json.loads(Path(path).read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise SchemaError(path, f"not valid JSON ({exc})") from exc
    if not isinstance(doc, dict) or "pages" not in doc:
        raise SchemaError(path, "missing top-level 'pages' list")
    pages: list[Page] = []
    for pi, page_doc in enumerate(doc["pages"]):
        try:
            width = int(page_doc["width"])
            height = int(page_doc["height"])
            page_id = str(page_doc.get("id", f"page-{pi}"))
            instances = []
            for ii, inst_doc in enumerate(page_doc.get("instances", [])):
                inst_id = str(inst_doc.get("id", f"{page_id}-l{ii:03d}"))
                pts = np.asarray(inst_doc["points"], dtype=float)
                if pts.ndim != 2 or pts.shape[1] != 2 or len(pts) < 3:
                    raise SchemaError(path, f"instance {inst_id!r} has malformed points")
                if clamp:
                    pts[:, 0] = np.clip(pts[:, 0], 0.0, float(width))
                    pts[:, 1] = np.clip(pts[:, 1], 0.0, float(height))
                try:
                    poly = Polygon(pts)
                except (GeometryError, ValueError) as exc:
                    raise SchemaError(path, f"instance {inst_id!r}: {exc}") from exc
                instances.append(
                    TextInstance(
                        polygon=poly,
                        id=inst_id,
                        direction=inst_doc.get("direction", "vertical"),
                        ignore=bool(inst_doc.get("ignore", False)),
                    )
                )
            pages.append(Page(width=width, height=height, instances=tuple(instances), id=page_id))
        except SchemaError:
            raise
        except (KeyError, TypeError, ValueError) as exc:
            raise SchemaError(path, f"page #{pi}: {exc}") from exc
    return pages


# ---------------------------------------------------------------------------
# Sweep CSV
# ---------------------------------------------------------------------------

SWEEP_COLUMNS = ["page_id", "instance_id", "text_aspect_ratio", "method", "u", "iou", "iters", "r", "s"]


def sweep_to_csv(
    rows: Iterable[tuple[str, float, float, SweepRecord]], meta: Mapping[str, Any]
) -> str:
    """RFC-4180 CSV; one leading '#' comment line carries the metadata block.

    Rows are (page_id, r, s, record). ``u`` is empty for the iterative method,
    ``iou`` is empty when the kernel split or vanished. The trailing r and s
    columns identify the shrink spec so one file can cover several specs.
    """
    buf = io.StringIO()
    buf.write("# " + json.dumps(dict(meta), sort_keys=True) + "\r\n")
    writer = csv.writer(buf, quoting=csv.QUOTE_MINIMAL)
    writer.writerow(SWEEP_COLUMNS)
    for page_id, r, s, rec in rows:
        writer.writerow(
            [
                page_id,
                rec.instance_id,
                f"{rec.text_aspect_ratio:.6f}",
                rec.method,
                "" if rec.u is None else f"{rec.u:.6g}",
                "" if rec.iou is None else f"{rec.iou:.6f}",
                rec.iterations,
                f"{r:.6g}",
                f"{s:.6g}",
            ]
        )
    return buf.getvalue()

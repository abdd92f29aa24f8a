"""Command-line front end wiring the modules into reproduction pipelines.

Commands: synth | targets | recover | sweep | eval. Exit codes are a stable
contract: 0 success, 1 IO/schema problems, 2 usage errors (including
infeasible synth configs), 3 numeric/geometric failures. Every output file
carries a metadata block with tool version, seed, and the full parameter set.
Page-level work parallelizes across --jobs threads (default from
HISTKERNEL_JOBS); results are ordered by page id so the output is independent
of the worker count.
"""

from __future__ import annotations

import json
import math
import sys
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict
from pathlib import Path
from typing import Any, Sequence

import click
import numpy as np

try:
    import tomllib
except ModuleNotFoundError:  # Python 3.10
    import tomli as tomllib

from . import __version__
from .evaluate import (
    DEFAULT_BUCKET_EDGES,
    bucketed_iou,
    match_detections,
    prf,
    recovery_iou_sweep,
)
from .formats import (
    SchemaError,
    atomic_write_text,
    load_pages,
    metadata_block,
    pages_to_json,
    sweep_to_csv,
)
from .geometry import GeometryError, text_aspect_ratio
from .offset import ShrinkSpec
from .raster import KernelMap, rasterize, read_pgm, read_png, write_pgm
from .recover import DEFAULT_MAX_ITERS, DEFAULT_TOLERANCE, RecoveryConfig, recover_map_detailed
from .synth import PackingError, SynthConfig, synth_corpus
from .targets import KernelOverlapWarning, Page, generate_page_targets


@click.group()
@click.version_option(version=__version__, prog_name="histkernel")
@click.option(
    "--jobs",
    type=int,
    default=1,
    envvar="HISTKERNEL_JOBS",
    show_default=True,
    help="Worker threads for page-level parallelism.",
)
@click.pass_context
def cli(ctx: click.Context, jobs: int) -> None:
    if jobs < 1:
        raise click.UsageError("--jobs must be >= 1")
    ctx.obj = {"jobs": jobs}


def _page_map(jobs: int, fn, pages: Sequence[Any]) -> list[Any]:
    if jobs == 1 or len(pages) <= 1:
        results = [fn(p) for p in pages]
    else:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(fn, pages))
    return results


def _load_config(path: Path) -> dict[str, Any]:
    text = path.read_bytes()
    if path.suffix.lower() == ".toml":
        return tomllib.loads(text.decode("utf-8"))
    return json.loads(text.decode("utf-8"))


def _tuple_fields(raw: dict[str, Any]) -> dict[str, Any]:
    out = dict(raw)
    for key, value in raw.items():
        if isinstance(value, list):
            out[key] = tuple(value)
    return out


@cli.command("synth")
@click.option("--config", "config_path", type=click.Path(path_type=Path), default=None,
              help="JSON or TOML file with generator fields (plus optional n_pages).")
@click.option("--out", "out_path", type=click.Path(path_type=Path), required=True)
@click.option("--seed", type=int, default=None, help="Overrides the config seed.")
@click.option("--pages", "n_pages", type=int, default=None, help="Overrides config n_pages.")
@click.option("--masks", "masks_dir", type=click.Path(path_type=Path), default=None,
              help="Also render one binary PGM instance mask per page into this directory.")
def cmd_synth(config_path: Path | None, out_path: Path, seed: int | None,
              n_pages: int | None, masks_dir: Path | None) -> None:
    """Generate a deterministic annotation file of synthetic pages."""
    raw: dict[str, Any] = {}
    if config_path is not None:
        if not config_path.exists():
            raise SchemaError(config_path, "config file not found")
        try:
            raw = _load_config(config_path)
        except (json.JSONDecodeError, tomllib.TOMLDecodeError, UnicodeDecodeError) as exc:
            raise click.UsageError(f"{config_path}: cannot parse config ({exc})")
    pages_wanted = int(raw.pop("n_pages", 1))
    if n_pages is not None:
        pages_wanted = n_pages
    if seed is not None:
        raw["seed"] = seed
    try:
        cfg = SynthConfig(**_tuple_fields(raw))
    except (TypeError, ValueError) as exc:
        raise click.UsageError(f"bad synth config: {exc}")
    pages = synth_corpus(cfg, pages_wanted)
    params = asdict(cfg)
    params.pop("seed")
    meta = metadata_block(seed=cfg.seed, n_pages=pages_wanted, **params)
    atomic_write_text(out_path, pages_to_json(pages, meta))
    if masks_dir is not None:
        masks_dir.mkdir(parents=True, exist_ok=True)
        for page in pages:
            mask = rasterize([inst.polygon for inst in page.instances], page.width, page.height)
            write_pgm(mask, masks_dir / f"{page.id}.pgm", comment=json.dumps(meta, sort_keys=True))
    total = sum(len(p.instances) for p in pages)
    click.echo(f"wrote {out_path}: pages={len(pages)} instances={total} seed={cfg.seed}")


@cli.command("targets")
@click.option("--ann", "ann_path", type=click.Path(path_type=Path), required=True)
@click.option("--r", "r", type=float, required=True, help="Shrink ratio in [0, 1).")
@click.option("--s", "s", type=float, default=1.0, show_default=True, help="Stretch ratio >= 1.")
@click.option("--out-dir", type=click.Path(path_type=Path), required=True)
@click.pass_context
def cmd_targets(ctx: click.Context, ann_path: Path, r: float, s: float, out_dir: Path) -> None:
    """Generate kernel maps (one PGM per page) plus a targets JSON."""
    try:
        spec = ShrinkSpec(r=r, s=s)
    except ValueError as exc:
        raise click.UsageError(str(exc))
    pages = load_pages(ann_path)
    out_dir.mkdir(parents=True, exist_ok=True)
    meta = metadata_block(r=r, s=s, ann=str(ann_path))

    def run(page: Page):
        with warnings.catch_warnings(record=True) as caught:
            warnings.simplefilter("always")
            targets, kmap = generate_page_targets(page, spec)
        overlaps = [str(w.message) for w in caught if isinstance(w.message, KernelOverlapWarning)]
        return page, targets, kmap, overlaps

    results = _page_map(ctx.obj["jobs"], run, pages)
    results.sort(key=lambda item: item[0].id)
    doc_pages = []
    counts = {"intact": 0, "split": 0, "vanished": 0}
    n_overlaps = 0
    for page, targets, kmap, overlaps in results:
        map_name = f"{page.id}.pgm"
        write_pgm(kmap, out_dir / map_name, comment=json.dumps(meta, sort_keys=True))
        n_overlaps += len(overlaps)
        kernels = []
        for t in targets:
            counts[t.kernel.status.value] += 1
            kernels.append(
                {
                    "instance_id": t.instance_id,
                    "distance": t.distance,
                    "status": t.kernel.status.value,
                    "parts": [[[float(x), float(y)] for x, y in part.vertices] for part in t.kernel.parts],
                }
            )
        doc_pages.append(
            {"id": page.id, "width": page.width, "height": page.height, "map": map_name,
             "kernels": kernels, "overlaps": overlaps}
        )
    doc = {"meta": meta, "pages": doc_pages}
    atomic_write_text(out_dir / "targets.json", json.dumps(doc, indent=2) + "\n")
    click.echo(
        f"pages={len(results)} kernels={sum(counts.values())} intact={counts['intact']} "
        f"split={counts['split']} vanished={counts['vanished']} overlaps={n_overlaps}"
    )


def _read_map(path: Path) -> KernelMap:
    suffix = path.suffix.lower()
    if suffix == ".pgm":
        return read_pgm(path)
    if suffix == ".png":
        return read_png(path)
    raise SchemaError(path, f"unsupported map format {suffix!r} (use .pgm or .png)")


@cli.command("recover")
@click.option("--map", "map_path", type=click.Path(path_type=Path), required=True)
@click.option("--method", type=click.Choice(["iedp", "unclip"]), required=True)
@click.option("--r", "r", type=float, required=True)
@click.option("--s", "s", type=float, default=1.0, show_default=True)
@click.option("--u", type=float, default=None, help="Unclip ratio (> 1); required for --method unclip.")
@click.option("--tol", type=float, default=DEFAULT_TOLERANCE, show_default=True)
@click.option("--max-iters", type=int, default=DEFAULT_MAX_ITERS, show_default=True)
@click.option("--binarize-t", type=float, default=0.3, show_default=True)
@click.option("--out", "out_path", type=click.Path(path_type=Path), required=True)
def cmd_recover(
    map_path: Path,
    method: str,
    r: float,
    s: float,
    u: float | None,
    tol: float,
    max_iters: int,
    binarize_t: float,
    out_path: Path,
) -> None:
    """Recover region polygons from a kernel map."""
    if method == "unclip" and u is None:
        raise click.UsageError("--method unclip requires --u")
    try:
        cfg = RecoveryConfig(method=method, spec=ShrinkSpec(r=r, s=s), u=u,
                             tolerance=tol, max_iters=max_iters)
    except ValueError as exc:
        raise click.UsageError(str(exc))
    kmap = _read_map(map_path)
    recovered = recover_map_detailed(kmap, cfg, binarize_t=binarize_t)
    page_id = map_path.stem
    meta = metadata_block(method=method, r=r, s=s, u=u, tol=tol, max_iters=max_iters,
                          binarize_t=binarize_t, map=str(map_path))
    doc = {
        "meta": meta,
        "pages": [
            {
                "id": page_id,
                "width": kmap.width,
                "height": kmap.height,
                "instances": [
                    {
                        "id": f"{page_id}-k{rec.index:03d}",
                        "points": [[float(x), float(y)] for x, y in rec.polygon.vertices],
                        "direction": "vertical",
                        "ignore": False,
                    }
                    for rec in recovered
                ],
            }
        ],
        "recovery": [
            {"id": f"{page_id}-k{rec.index:03d}", "iterations": rec.iterations,
             "converged": rec.converged}
            for rec in recovered
        ],
    }
    atomic_write_text(out_path, json.dumps(doc, indent=2) + "\n")
    n_conv = sum(rec.converged for rec in recovered)
    click.echo(f"recovered={len(recovered)} converged={n_conv}")


def _parse_grid(text: str) -> list[float]:
    try:
        start, stop, step = (float(tok) for tok in text.split(":"))
    except ValueError:
        raise click.UsageError(f"--u-grid must be start:stop:step, got {text!r}")
    if step <= 0 or stop < start:
        raise click.UsageError(f"--u-grid must be an increasing range, got {text!r}")
    values = np.arange(start, stop + step / 2.0, step)
    return [round(float(v), 10) for v in values]


def _parse_spec(text: str) -> ShrinkSpec:
    try:
        r, s = (float(tok) for tok in text.split(","))
        return ShrinkSpec(r=r, s=s)
    except ValueError as exc:
        raise click.UsageError(f"--spec must be 'r,s' with r in [0,1), s >= 1: {exc}")


@cli.command("sweep")
@click.option("--ann", "ann_path", type=click.Path(path_type=Path), required=True)
@click.option("--spec", "specs", multiple=True, required=True,
              help="Shrink spec as 'r,s'; repeatable.")
@click.option("--u-grid", default="1.0:3.0:0.1", show_default=True,
              help="Unclip ratio grid start:stop:step (inclusive).")
@click.option("--iedp/--no-iedp", "include_iedp", default=True, show_default=True,
              help="Also emit one ratio-free iterative row per instance.")
@click.option("--tol", type=float, default=DEFAULT_TOLERANCE, show_default=True)
@click.option("--out", "out_path", type=click.Path(path_type=Path), required=True)
@click.pass_context
def cmd_sweep(
    ctx: click.Context,
    ann_path: Path,
    specs: tuple[str, ...],
    u_grid: str,
    include_iedp: bool,
    tol: float,
    out_path: Path,
) -> None:
    """Long-format recovery-IoU sweep CSV over {specs x methods x u}."""
    shrink_specs = [_parse_spec(s) for s in specs]
    grid = _parse_grid(u_grid)
    pages = load_pages(ann_path)

    def run(job):
        page, spec = job
        records = recovery_iou_sweep(
            page.instances, spec, grid, include_iterative=include_iedp, tolerance=tol
        )
        return [(page.id, spec.r, spec.s, rec) for rec in records]

    jobs = [(page, spec) for spec in shrink_specs for page in pages]
    chunks = _page_map(ctx.obj["jobs"], run, jobs)
    rows = [row for chunk in chunks for row in chunk]
    rows.sort(key=lambda row: (row[1], row[2], row[0], row[3].instance_id, row[3].method,
                               row[3].u if row[3].u is not None else -1.0))
    meta = metadata_block(ann=str(ann_path), specs=[(s.r, s.s) for s in shrink_specs],
                          u_grid=grid, iedp=include_iedp, tol=tol)
    atomic_write_text(out_path, sweep_to_csv(rows, meta))
    click.echo(f"wrote {out_path}: rows={len(rows)}")


@cli.command("eval")
@click.option("--pred", "pred_path", type=click.Path(path_type=Path), required=True)
@click.option("--gt", "gt_path", type=click.Path(path_type=Path), required=True)
@click.option("--thresholds", default="0.5,0.75", show_default=True)
@click.option("--bucket-edges", default=",".join(str(e) for e in DEFAULT_BUCKET_EDGES),
              show_default=True, help="Aspect-ratio bucket edges for the IoU breakdown.")
@click.option("--out", "out_path", type=click.Path(path_type=Path), required=True)
@click.pass_context
def cmd_eval(
    ctx: click.Context,
    pred_path: Path,
    gt_path: Path,
    thresholds: str,
    bucket_edges: str,
    out_path: Path,
) -> None:
    """Match predictions against ground truth and report P/R/F per threshold."""
    try:
        thr_list = sorted({float(tok) for tok in thresholds.split(",") if tok.strip()})
        edges = [float(tok) for tok in bucket_edges.split(",") if tok.strip()]
    except ValueError as exc:
        raise click.UsageError(f"bad numeric list: {exc}")
    if not thr_list or any(not (0.0 < t < 1.0) for t in thr_list):
        raise click.UsageError("thresholds must lie in (0, 1)")
    pred_pages = {p.id: p for p in load_pages(pred_path)}
    gt_pages = load_pages(gt_path)

    def run(gt_page: Page):
        pred_page = pred_pages.get(gt_page.id)
        preds = [inst.polygon for inst in pred_page.instances] if pred_page else []
        per_threshold = {}
        bucket_records = []
        for t in thr_list:
            match = match_detections(preds, list(gt_page.instances), t)
            per_threshold[t] = match
            if t == thr_list[0]:
                by_id = {inst.id: inst for inst in gt_page.instances}
                for gt_id, _, iou in match.pairs:
                    inst = by_id[gt_id]
                    bucket_records.append((text_aspect_ratio(inst.polygon, inst.direction), iou))
                for gt_id in match.unmatched_gt:
                    inst = by_id[gt_id]
                    bucket_records.append((text_aspect_ratio(inst.polygon, inst.direction), 0.0))
        return gt_page.id, per_threshold, bucket_records

    results = _page_map(ctx.obj["jobs"], run, gt_pages)
    results.sort(key=lambda item: item[0])

    report: dict[str, Any] = {"meta": metadata_block(pred=str(pred_path), gt=str(gt_path),
                                                     thresholds=thr_list, bucket_edges=edges)}
    report["thresholds"] = {}
    for t in thr_list:
        matches = preds_n = gts_n = 0
        per_page = {}
        for page_id, per_threshold, _ in results:
            m = per_threshold[t]
            r = prf(m)
            per_page[page_id] = {"precision": r.precision, "recall": r.recall,
                                 "f_measure": r.f_measure, "matches": r.n_matches}
            matches += r.n_matches
            preds_n += m.n_scored_preds
            gts_n += m.n_scored_gts
        precision = 1.0 if preds_n == 0 else matches / preds_n
        recall = 1.0 if gts_n == 0 else matches / gts_n
        f = 0.0 if precision + recall == 0 else 2 * precision * recall / (precision + recall)
        report["thresholds"][f"{t:g}"] = {
            "precision": precision, "recall": recall, "f_measure": f,
            "matches": matches, "n_pred": preds_n, "n_gt": gts_n, "per_page": per_page,
        }
    all_records = [rec for _, _, recs in results for rec in recs]
    bucket_report = bucketed_iou(all_records, edges)
    report["buckets"] = {
        "edges": edges,
        "rows": [
            {"lo": lo, "hi": (None if math.isinf(hi) else hi), "mean_iou": mean, "count": count}
            for lo, hi, mean, count in bucket_report.buckets
        ],
        "overflow": {"mean_iou": bucket_report.overflow[0], "count": bucket_report.overflow[1]},
    }
    atomic_write_text(out_path, json.dumps(report, indent=2) + "\n")
    headline = " ".join(
        f"F@{t:g}={report['thresholds'][f'{t:g}']['f_measure']:.4f}" for t in thr_list
    )
    click.echo(headline)


def main(argv: Sequence[str] | None = None) -> int:
    """Entry point with the stable exit-code contract."""
    try:
        cli.main(args=argv, standalone_mode=False)
        return 0
    except click.exceptions.Exit as exc:
        return exc.exit_code
    except click.UsageError as exc:
        exc.show()
        return 2
    except click.ClickException as exc:
        exc.show()
        return exc.exit_code
    except PackingError as exc:
        click.echo(f"error: infeasible layout: {exc}", err=True)
        return 2
    except SchemaError as exc:
        click.echo(f"error: {exc}", err=True)
        return 1
    except OSError as exc:
        click.echo(f"error: {exc}", err=True)
        return 1
    except GeometryError as exc:
        click.echo(f"error: numeric failure: {exc}", err=True)
        return 3


if __name__ == "__main__":
    sys.exit(main())

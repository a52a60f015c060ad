"""Command-line surface: one subcommand per pipeline stage plus end-to-end.

Exit codes are fixed for scripting: 0 success, 1 I/O failure, 2 validation
or usage error. Every command is deterministic given its inputs and flags.
Batch inputs are processed in parallel per file, capped by HIDE_NUM_THREADS.
"""

from __future__ import annotations

import functools
import json
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import click

from .boxes import read_boxes, write_boxes
from .bundle import read_bundle, write_bundle
from .errors import HideError, ValidationError
from .imaging import load_png, save_png
from .layout import recompose_with_provenance, write_provenance
from .metrics import evaluation_report
from .pipeline import PipelineConfig, purify_bundle, regions_from_bundle, run_pipeline
from .synth import SynthSpec, generate, write_samples

MODE_NAMES = {
    "sequence": "sequence_tiling",
    "random": "random_tiling",
    "mask": "masking",
    "layout": "layout_no_compaction",
    "compact": "layout_compact",
}


def _max_workers(n_jobs: int) -> int:
    cap = os.environ.get("HIDE_NUM_THREADS")
    if cap:
        try:
            return max(1, min(n_jobs, int(cap)))
        except ValueError:
            raise ValidationError(f"HIDE_NUM_THREADS={cap!r} is not an integer")
    return max(1, min(n_jobs, os.cpu_count() or 1))


def _parse_fill(text: str) -> tuple[int, int, int]:
    parts = text.split(",")
    if len(parts) != 3:
        raise ValidationError(f"--fill expects r,g,b, got {text!r}")
    try:
        rgb = tuple(int(p) for p in parts)
    except ValueError:
        raise ValidationError(f"--fill expects integers, got {text!r}")
    if any(not 0 <= v <= 255 for v in rgb):
        raise ValidationError(f"--fill components must be in 0..255, got {text!r}")
    return rgb


def handle_errors(fn):
    @functools.wraps(fn)
    def wrapper(*args, **kwargs):
        try:
            return fn(*args, **kwargs)
        except HideError as exc:
            click.echo(f"error: {exc}", err=True)
            sys.exit(2)
        except OSError as exc:
            click.echo(f"i/o error: {exc}", err=True)
            sys.exit(1)

    return wrapper


@click.group()
def main():
    """Attention-map purification, box extraction, and image compaction."""


@main.command()
@click.argument("bundle_in", type=click.Path())
@click.option("--sigma", type=float, default=3.0, show_default=True, help="Gaussian std-dev in patch units.")
@click.option("--out", "out_path", type=click.Path(), required=True)
@handle_errors
def purify(bundle_in, sigma, out_path):
    """Smooth, normalize, and noise-subtract the key maps of a bundle."""
    bundle = read_bundle(bundle_in)
    write_bundle(purify_bundle(bundle, sigma), out_path)
    click.echo(f"wrote {out_path}")


def _regions_one(bundle_path: Path, out_path: Path, config: PipelineConfig) -> None:
    boxes = regions_from_bundle(read_bundle(bundle_path), config)
    write_boxes(boxes, out_path)


@main.command()
@click.argument("bundle_in", type=click.Path())
@click.option("--sigma", type=float, default=3.0, show_default=True)
@click.option("--alpha", type=float, default=0.7, show_default=True)
@click.option("--connectivity", type=click.Choice(["4", "8"]), default="8", show_default=True)
@click.option("--min-area", type=int, default=1, show_default=True)
@click.option("--use-noise-prior/--no-noise-prior", default=True, show_default=True)
@click.option("--out", "out_path", type=click.Path(), required=True,
              help="Boxes JSON path; for a directory input, the per-sample file name.")
@handle_errors
def regions(bundle_in, sigma, alpha, connectivity, min_area, use_noise_prior, out_path):
    """Extract bounding boxes from a bundle (or every bundle in a directory)."""
    config = PipelineConfig(
        sigma=sigma,
        alpha=alpha,
        connectivity=int(connectivity),
        min_area=min_area,
        use_noise_prior=use_noise_prior,
    )
    src = Path(bundle_in)
    if src.is_dir():
        bundles = sorted(src.rglob("*.hab"))
        if not bundles:
            raise ValidationError(f"no .hab bundles under {src}")
        jobs = [(b, b.parent / out_path) for b in bundles]
        with ThreadPoolExecutor(max_workers=_max_workers(len(jobs))) as pool:
            futures = {pool.submit(_regions_one, b, o, config): b for b, o in jobs}
            for future, bundle_path in futures.items():
                future.result()
                click.echo(f"[{bundle_path.parent.name}] done")
    else:
        _regions_one(src, Path(out_path), config)
        click.echo(f"wrote {out_path}")


@main.command()
@click.argument("image_in", type=click.Path())
@click.argument("boxes_in", type=click.Path())
@click.option("--fill", default="128,128,128", show_default=True, help="Blank-cell color r,g,b.")
@click.option("--mode", type=click.Choice(sorted(MODE_NAMES)), default="compact", show_default=True)
@click.option("--seed", type=int, default=0, show_default=True, help="Shuffle seed for random mode.")
@click.option("--out", "out_path", type=click.Path(), required=True)
@handle_errors
def compact(image_in, boxes_in, fill, mode, seed, out_path):
    """Recompose the image from its boxes; writes PNG plus provenance JSON."""
    image = load_png(image_in)
    boxes = read_boxes(boxes_in)
    result = recompose_with_provenance(
        image, boxes, MODE_NAMES[mode], fill=_parse_fill(fill), seed=seed
    )
    if result.degenerate:
        click.echo("warning: empty box set, passing original image through", err=True)
    save_png(result.pixels, out_path)
    write_provenance(result, str(out_path) + ".provenance.json")
    click.echo(f"wrote {out_path}")


@main.command()
@click.argument("image_in", type=click.Path())
@click.argument("bundle_in", type=click.Path())
@click.option("--sigma", type=float, default=3.0, show_default=True)
@click.option("--alpha", type=float, default=0.7, show_default=True)
@click.option("--connectivity", type=click.Choice(["4", "8"]), default="8", show_default=True)
@click.option("--min-area", type=int, default=1, show_default=True)
@click.option("--fill", default="128,128,128", show_default=True)
@click.option("--mode", type=click.Choice(sorted(MODE_NAMES)), default="compact", show_default=True)
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--out-dir", type=click.Path(), required=True)
@handle_errors
def pipeline(image_in, bundle_in, sigma, alpha, connectivity, min_area, fill, mode, seed, out_dir):
    """Run the full chain and emit compact.png, boxes.json, overlay.png."""
    config = PipelineConfig(
        sigma=sigma,
        alpha=alpha,
        connectivity=int(connectivity),
        min_area=min_area,
        fill=_parse_fill(fill),
        mode=MODE_NAMES[mode],
        seed=seed,
    )
    image = load_png(image_in)
    bundle = read_bundle(bundle_in)
    result = run_pipeline(image, bundle, config)
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    if result.compact.degenerate:
        click.echo("warning: empty box set, passing original image through", err=True)
    save_png(result.compact.pixels, out / "compact.png")
    write_boxes(result.boxes, out / "boxes.json")
    save_png(result.overlay, out / "overlay.png")
    write_provenance(result.compact, out / "provenance.json")
    click.echo(f"wrote {out}/compact.png, boxes.json, overlay.png")


@main.command()
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--samples", type=int, default=10, show_default=True)
@click.option("--grid", default="24x24", show_default=True, help="Patch grid ROWSxCOLS.")
@click.option("--image-size", default="240x240", show_default=True, help="Pixel dims WxH.")
@click.option("--tokens", type=int, default=2, show_default=True)
@click.option("--noise-tokens", type=int, default=4, show_default=True)
@click.option("--blob-range", default="2-4", show_default=True, help="Blob side range in patches.")
@click.option("--signal", type=float, default=0.45, show_default=True)
@click.option("--sink", type=float, default=0.9, show_default=True)
@click.option("--sink-size", type=int, default=3, show_default=True)
@click.option("--noise-std", type=float, default=0.0, show_default=True)
@click.option("--out", "out_dir", type=click.Path(), required=True)
@handle_errors
def synth(seed, samples, grid, image_size, tokens, noise_tokens, blob_range,
          signal, sink, sink_size, noise_std, out_dir):
    """Generate labeled synthetic samples: bundle.hab, gt.json, image.png."""
    try:
        rows, cols = (int(v) for v in grid.split("x"))
        width, height = (int(v) for v in image_size.split("x"))
        blob_min, blob_max = (int(v) for v in blob_range.split("-"))
    except ValueError:
        raise ValidationError("expected --grid RxC, --image-size WxH, --blob-range MIN-MAX")
    spec = SynthSpec(
        seed=seed,
        n_samples=samples,
        patch_rows=rows,
        patch_cols=cols,
        image_width=width,
        image_height=height,
        n_tokens=tokens,
        n_noise_tokens=noise_tokens,
        blob_min=blob_min,
        blob_max=blob_max,
        signal_amplitude=signal,
        sink_amplitude=sink,
        sink_size=sink_size,
        noise_std=noise_std,
    )
    dirs = write_samples(generate(spec), out_dir)
    click.echo(f"wrote {len(dirs)} samples under {out_dir}")


def _collect_pairs(pred_path: Path, gt_path: Path) -> list:
    if gt_path.is_dir():
        pairs = []
        for gt_file in sorted(gt_path.rglob("gt.json")):
            sample_dir = gt_file.parent
            rel = sample_dir.relative_to(gt_path)
            pred_file = (pred_path / rel / "boxes.json") if pred_path.is_dir() else None
            if pred_file is None or not pred_file.exists():
                raise ValidationError(f"no boxes.json for sample {rel}")
            pairs.append((str(rel), read_boxes(pred_file), read_boxes(gt_file)))
        if not pairs:
            raise ValidationError(f"no gt.json files under {gt_path}")
        return pairs
    return [(gt_path.name, read_boxes(pred_path), read_boxes(gt_path))]


@main.command(name="eval")
@click.option("--pred", "pred_path", type=click.Path(), required=True,
              help="Boxes JSON file, or directory of sample_*/boxes.json.")
@click.option("--gt", "gt_path", type=click.Path(), required=True,
              help="Boxes JSON file, or directory of sample_*/gt.json.")
@click.option("--iou", "iou_threshold", type=float, default=0.5, show_default=True)
@click.option("--out", "out_path", type=click.Path(), default=None)
@handle_errors
def eval_cmd(pred_path, gt_path, iou_threshold, out_path):
    """Score predicted boxes against ground truth at an IoU threshold."""
    pairs = _collect_pairs(Path(pred_path), Path(gt_path))
    report = evaluation_report(pairs, iou_threshold)
    text = json.dumps(report, indent=2, sort_keys=True)
    if out_path:
        Path(out_path).write_text(text + "\n", encoding="utf-8")
        click.echo(f"wrote {out_path}")
    agg = report["aggregate"]
    click.echo(f"recall@{iou_threshold}: {agg['recall']:.4f}  mean IoU: {agg['mean_iou']:.4f}")


@main.command()
@click.option("--host", default="127.0.0.1", show_default=True)
@click.option("--port", type=int, default=8000, show_default=True)
def serve(host, port):
    """Start the HTTP service wrapping the pipeline."""
    import uvicorn

    from .service.app import app

    uvicorn.run(app, host=host, port=port)


if __name__ == "__main__":
    main()

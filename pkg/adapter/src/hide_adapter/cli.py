"""CLI for exporting attention bundles from a hooked model."""

from __future__ import annotations

import sys

import click
import numpy as np
from PIL import Image

from .extraction import (
    DEFAULT_EXTRACT_TEMPLATE,
    DEFAULT_SEARCH_TEMPLATE,
    AdapterError,
    ExtractionConfig,
    NoKeyTokensError,
    collect_noise_tokens,
    export_bundle,
    extract_key_tokens,
    load_model,
    render_prompt,
)
from .hab import TokenRef
from .tokenizer import tokenize


@click.group()
def main():
    """Model-side attention extraction."""


@main.command()
@click.option("--model", default="toy", show_default=True)
@click.option("--layer", type=int, default=2, show_default=True)
@click.option("--image", "image_path", type=click.Path(exists=True), required=True)
@click.option("--question", required=True)
@click.option("--out", "out_path", type=click.Path(), required=True)
@click.option("--head-agg", type=click.Choice(["mean", "max"]), default="mean", show_default=True)
@click.option("--max-image-tokens", type=int, default=1024, show_default=True)
@click.option("--offload/--no-offload", default=True, show_default=True)
@click.option("--extract-template", default=DEFAULT_EXTRACT_TEMPLATE)
@click.option("--search-template", default=DEFAULT_SEARCH_TEMPLATE)
def export(model, layer, image_path, question, out_path, head_agg,
           max_image_tokens, offload, extract_template, search_template):
    """Run the extract prompt, compute per-token attention, write a bundle."""
    cfg = ExtractionConfig(
        model=model,
        layer=layer,
        head_aggregation=head_agg,
        extract_template=extract_template,
        search_template=search_template,
        max_image_tokens=max_image_tokens,
        offload=offload,
    )
    try:
        loaded = load_model(cfg)
        with Image.open(image_path) as img:
            pixels = np.asarray(img.convert("RGB"))
        try:
            keys = extract_key_tokens(pixels, question, cfg, model=loaded)
        except NoKeyTokensError:
            click.echo("warning: no key phrases extracted; falling back to question words", err=True)
            prompt = render_prompt(question, cfg)
            keys = [
                TokenRef(text=w, position=prompt.index(w))
                for w in tokenize(question)
                if w in prompt
            ]
            if not keys:
                raise AdapterError("question tokens not present in prompt")
        noise = collect_noise_tokens(question, cfg)
        result = export_bundle(pixels, question, keys, noise, cfg, out_path, model=loaded)
    except AdapterError as exc:
        click.echo(f"error: {exc}", err=True)
        sys.exit(2)
    except OSError as exc:
        click.echo(f"i/o error: {exc}", err=True)
        sys.exit(1)
    click.echo(
        f"wrote {result.path}: grid {result.patch_rows}x{result.patch_cols}, "
        f"{result.n_key} key + {result.n_noise} noise planes"
    )


if __name__ == "__main__":
    main()

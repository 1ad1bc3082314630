"""deepfeat command line: manifest in, KFV1 feature container out.

The weights file is pinned by checksum through the tool config so runs are
attributable to an exact network; the computed digest is always echoed.
"""

from __future__ import annotations

import hashlib
import json
import sys
from pathlib import Path

import click

from . import __version__
from .detect import detect_and_crop, find_detector
from .kfv import write_blocks
from .vgg import extract_layers, load_network


def _sha256(path: Path) -> str:
    digest = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            digest.update(chunk)
    return digest.hexdigest()


def load_manifest_images(path: Path) -> list[dict]:
    """Minimal schema-1 manifest reader: id/path pairs resolved to files."""
    try:
        doc = json.loads(path.read_text(encoding="utf-8"))
    except OSError:
        click.echo(f"error: {path}: cannot read manifest", err=True)
        sys.exit(3)
    except json.JSONDecodeError:
        click.echo(f"error: {path}: manifest is not valid JSON", err=True)
        sys.exit(4)
    if doc.get("schema") != 1 or "images" not in doc:
        click.echo(f"error: {path}: expected manifest with schema: 1", err=True)
        sys.exit(4)
    images = []
    for entry in doc["images"]:
        images.append({"id": str(entry["id"]), "path": path.parent / entry["path"]})
    return images


@click.command()
@click.version_option(version=__version__)
@click.option("--manifest", "manifest_path", required=True, type=click.Path(path_type=Path))
@click.option("--out", "out_path", required=True, type=click.Path(path_type=Path))
@click.option("--weights", "weights_path", required=True, type=click.Path(path_type=Path))
@click.option(
    "--config",
    "config_path",
    default=None,
    type=click.Path(path_type=Path),
    help="Tool config JSON; honors weights_sha256 pinning.",
)
def main(manifest_path, out_path, weights_path, config_path):
    """Crop faces and write fc6/relu6/fc7/relu7 activations as KFV1."""
    images = load_manifest_images(manifest_path)
    if not weights_path.exists():
        click.echo(f"error: {weights_path}: weights file missing", err=True)
        sys.exit(3)

    digest = _sha256(weights_path)
    click.echo(f"weights sha256: {digest}")
    if config_path is not None:
        try:
            config = json.loads(config_path.read_text(encoding="utf-8"))
        except (OSError, json.JSONDecodeError):
            click.echo(f"error: {config_path}: cannot read tool config", err=True)
            sys.exit(4)
        expected = config.get("weights_sha256")
        if expected and expected != digest:
            click.echo(
                f"error: weights checksum mismatch: expected {expected}, got {digest}",
                err=True,
            )
            sys.exit(5)

    model = load_network(weights_path)
    detector = find_detector()
    if detector is None:
        click.echo("no MTCNN backend installed; all images use center-crop fallback", err=True)

    blocks = []
    fallbacks = 0
    for entry in images:
        try:
            crop, used_fallback = detect_and_crop(entry["path"], detector)
        except (OSError, ValueError) as exc:
            click.echo(f"error: {entry['path']}: unreadable image ({exc})", err=True)
            sys.exit(3)
        fallbacks += int(used_fallback)
        blocks.append((entry["id"], extract_layers(model, crop)))
    out_path.parent.mkdir(parents=True, exist_ok=True)
    write_blocks(blocks, out_path)
    click.echo(
        f"wrote {len(blocks)} blocks ({blocks[0][1].shape[0]}x{blocks[0][1].shape[1]}) "
        f"to {out_path}; {fallbacks} center-crop fallbacks"
    )


if __name__ == "__main__":
    main()

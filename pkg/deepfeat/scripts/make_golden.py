#!/usr/bin/env python3
"""Regenerate the cross-component golden fixture.

Runs the deepfeat CLI on two deterministic synthetic images with seeded
random VGG16 weights and copies the emitted KFV1 container, plus an .npz of
the expected ids/values (read back through this tool's own reader), into
the verification core's tests/fixtures/ directory.  Published pretrained
weights are not redistributable, so the fixture pins the container format
and reader fidelity rather than any particular network.
"""

import json
import shutil
import sys
import tempfile
from pathlib import Path

import numpy as np
import torch
from click.testing import CliRunner
from PIL import Image

sys.path.insert(0, str(Path(__file__).resolve().parents[1] / "src"))

from deepfeat.cli import main  # noqa: E402
from deepfeat.kfv import read_blocks  # noqa: E402
from deepfeat.vgg import Vgg16  # noqa: E402

FIXTURES = Path(__file__).resolve().parents[2] / "tests" / "fixtures"
WEIGHTS_SEED = 20240


def synthetic_image(size=160, flavor=0):
    y, x = np.mgrid[0:size, 0:size].astype(np.float64)
    r = np.hypot(x - size / 2, y - size / 2)
    channels = [
        30 + 200 * x / size,
        255 - 200 * y / size,
        np.clip(250 - (2.0 + flavor) * r, 0, 255),
    ]
    if flavor:
        channels = channels[::-1]
    return np.stack(channels, axis=2).astype(np.uint8)


def run():
    FIXTURES.mkdir(parents=True, exist_ok=True)
    with tempfile.TemporaryDirectory() as tmp:
        tmp = Path(tmp)
        torch.manual_seed(WEIGHTS_SEED)
        state = {k: v.to(torch.float16) for k, v in Vgg16().state_dict().items()}
        weights = tmp / "vgg16_random.pt"
        torch.save(state, weights)

        entries = []
        for i, name in enumerate(["golden-a", "golden-b"]):
            Image.fromarray(synthetic_image(flavor=i)).save(tmp / f"{name}.png")
            entries.append(
                {"id": name, "path": f"{name}.png", "role": "father", "family_id": "g"}
            )
        manifest = tmp / "manifest.json"
        manifest.write_text(json.dumps({"schema": 1, "name": "golden", "images": entries}))

        out = tmp / "golden_vgg.kfv"
        result = CliRunner().invoke(
            main, ["--manifest", str(manifest), "--out", str(out), "--weights", str(weights)]
        )
        if result.exit_code != 0:
            raise SystemExit(f"deepfeat failed: {result.output}")
        print(result.output.strip())

        blocks = read_blocks(out)
        shutil.copy(out, FIXTURES / "golden_vgg.kfv")
        np.savez(
            FIXTURES / "golden_vgg_expected.npz",
            ids=np.array([i for i, _ in blocks]),
            **{f"block{n}": data for n, (_, data) in enumerate(blocks)},
        )
    print(f"fixtures written to {FIXTURES}")


if __name__ == "__main__":
    run()

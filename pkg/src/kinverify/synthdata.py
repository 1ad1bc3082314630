"""Synthetic kinship data for benchmarks and the bundled demo.

Feature-level generator: each family owns a unit latent vector; parent and
child samples observe it through independent Gaussian noise, so kinship is
verifiable by construction.  Image-level generator: smooth per-family color
fields rendered as small PNGs with a schema-1 manifest, enough to exercise
the full image pipeline deterministically.
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from .dataset import FeatureBlock
from .errors import InvalidArgumentError
from .imaging import Image, gaussian_surround, save_image
from .rng import Rng, mix_seed


def latent_pair_features(
    n_families: int,
    samples_per_side: int = 1,
    dim: tuple[int, int] = (32, 4),
    noise: float = 0.1,
    seed: int = 0,
    informative: bool = True,
):
    """Parent/child FeatureBlocks plus family labels.

    With informative=True all of a family's samples share its unit latent
    vector (plus independent noise); with informative=False every sample is
    independent noise, so verification accuracy should sit at chance.
    """
    if n_families < 2:
        raise InvalidArgumentError("need at least 2 families")
    if samples_per_side < 1:
        raise InvalidArgumentError("need at least 1 sample per side")
    d = dim[0] * dim[1]
    rng = Rng(seed)
    parents, children, families = [], [], []
    for f in range(n_families):
        fam = f"fam{f:04d}"
        latent = rng.normals(d)
        latent /= np.linalg.norm(latent)
        for view, bucket in (("p", parents), ("c", children)):
            for k in range(samples_per_side):
                if informative:
                    sample = latent + noise * rng.normals(d)
                else:
                    sample = rng.normals(d)
                block = FeatureBlock(
                    sample_id=f"{fam}-{view}{k}",
                    data=sample.reshape(dim, order="F"),
                )
                bucket.append(block)
        families.append(fam)
    return parents, children, families


_DEMO_ROLES = ("father", "mother", "son", "daughter")


def _smooth_field(rng: Rng, size: int, sigma: float) -> np.ndarray:
    field = rng.floats(size * size).reshape(size, size)
    return gaussian_surround(field, sigma)


def write_demo_dataset(
    out_dir, n_families: int = 12, image_size: int = 48, seed: int = 7
) -> Path:
    """Render a small synthetic face-like dataset and return the manifest path.

    Each family gets one smooth latent field per channel; members add small
    role-specific structure and noise on top, so relatives look alike.
    """
    out_dir = Path(out_dir)
    images_dir = out_dir / "images"
    images_dir.mkdir(parents=True, exist_ok=True)
    entries = []
    for f in range(n_families):
        fam = f"fam{f:02d}"
        fam_rng = Rng(mix_seed(seed, f))
        base = np.stack(
            [_smooth_field(fam_rng, image_size, image_size / 10.0) for _ in range(3)]
        )
        base = 40.0 + 175.0 * (base - base.min()) / max(float(np.ptp(base)), 1e-9)
        # mid-frequency family trait: survives illumination normalization
        trait = np.stack(
            [_smooth_field(fam_rng, image_size, image_size / 28.0) for _ in range(3)]
        )
        trait = (trait - trait.mean()) * 900.0
        for r, role in enumerate(_DEMO_ROLES):
            member_rng = Rng(mix_seed(seed, f, r + 1))
            detail = np.stack(
                [_smooth_field(member_rng, image_size, image_size / 24.0) for _ in range(3)]
            )
            detail = (detail - detail.mean()) * 220.0
            grain = member_rng.floats(3 * image_size * image_size).reshape(base.shape)
            plane = np.clip(base + trait + detail + 12.0 * (grain - 0.5), 0, 255)
            image_id = f"{fam}-{role}"
            save_image(Image(plane), images_dir / f"{image_id}.png")
            entries.append(
                {
                    "id": image_id,
                    "path": f"images/{image_id}.png",
                    "role": role,
                    "family_id": fam,
                }
            )
    manifest = {"schema": 1, "name": f"demo-{n_families}", "images": entries}
    manifest_path = out_dir / "manifest.json"
    manifest_path.write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    return manifest_path

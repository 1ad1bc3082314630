"""Dataset manifests, fold/pair protocol construction, the feature-container
file format, baseline features, and tensor assembly.

The verification protocol splits BY FAMILY so no identity appears in both a
training and a test fold, and balances each fold's positives with an equal
number of cross-family negatives drawn by a seeded derangement.
"""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import imaging
from .errors import (
    FileAccessError,
    InvalidArgumentError,
    ProtocolError,
    UnsupportedFormatError,
)
from .rng import Rng

PARENT_ROLES = ("father", "mother", "parent")
CHILD_ROLES = ("son", "daughter", "child")
RELATIONS = ("FS", "FD", "MS", "MD", "PC")

KIN = "kin"
NON_KIN = "non-kin"

_KFV_MAGIC = b"KFV1"
_KFV_HEADER = struct.Struct("<4sIIIIB3x")
_BASELINE_SIZE = 64


def relation_for(parent_role: str, child_role: str) -> str:
    specific = {
        ("father", "son"): "FS",
        ("father", "daughter"): "FD",
        ("mother", "son"): "MS",
        ("mother", "daughter"): "MD",
    }
    return specific.get((parent_role, child_role), "PC")


@dataclass(frozen=True)
class ManifestImage:
    id: str
    path: str
    role: str
    family_id: str
    subset: str | None = None


@dataclass(frozen=True)
class ManifestPair:
    parent_id: str
    child_id: str
    relation: str


@dataclass(frozen=True)
class DatasetManifest:
    name: str
    images: tuple[ManifestImage, ...]
    pairs: tuple[ManifestPair, ...]
    base_dir: Path = field(default_factory=Path)

    def image_by_id(self, image_id: str) -> ManifestImage:
        return self._index()[image_id]

    def family_of(self, image_id: str) -> str:
        return self._index()[image_id].family_id

    def role_of(self, image_id: str) -> str:
        return self._index()[image_id].role

    def image_path(self, image_id: str) -> Path:
        return self.base_dir / self._index()[image_id].path

    def families(self) -> list[str]:
        return sorted({img.family_id for img in self.images})

    def _index(self) -> dict[str, ManifestImage]:
        cached = self.__dict__.get("_by_id")
        if cached is None:
            cached = {img.id: img for img in self.images}
            self.__dict__["_by_id"] = cached
        return cached


@dataclass(frozen=True)
class FoldAssignment:
    k: int
    seed: int
    assignment: dict[str, int]

    def families_in_fold(self, fold: int) -> list[str]:
        return sorted(f for f, i in self.assignment.items() if i == fold)


@dataclass(frozen=True)
class PairEntry:
    parent_id: str
    child_id: str
    label: str
    relation: str
    fold: int = -1


@dataclass(frozen=True)
class FeatureBlock:
    """Per-sample feature matrix, mode-1 features x mode-2 channels."""

    sample_id: str
    data: np.ndarray

    def __post_init__(self):
        d = np.asarray(self.data, dtype=np.float32)
        if d.ndim != 2:
            raise InvalidArgumentError(f"feature data must be 2-D, got shape {d.shape}")
        if not np.all(np.isfinite(d)):
            raise InvalidArgumentError("feature data must be finite")
        d = np.ascontiguousarray(d)
        d.flags.writeable = False
        object.__setattr__(self, "data", d)


def parse_manifest(path) -> DatasetManifest:
    """Load and validate a schema-1 manifest, deriving implicit kin pairs.

    When the explicit pair list is absent, every parent-role x child-role
    combination inside a family becomes a kin pair.
    """
    path = Path(path)
    try:
        raw = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise FileAccessError(f"{path}: cannot read manifest") from exc
    try:
        doc = json.loads(raw)
    except json.JSONDecodeError as exc:
        raise UnsupportedFormatError(f"{path}: manifest is not valid JSON") from exc
    if not isinstance(doc, dict) or doc.get("schema") != 1:
        raise UnsupportedFormatError(f"{path}: expected manifest with schema: 1")

    images = []
    seen: set[str] = set()
    for entry in doc.get("images", []):
        img = ManifestImage(
            id=str(entry["id"]),
            path=str(entry["path"]),
            role=str(entry["role"]),
            family_id=str(entry["family_id"]),
            subset=entry.get("subset"),
        )
        if img.id in seen:
            raise UnsupportedFormatError(f"{path}: duplicate image id {img.id!r}")
        if img.role not in PARENT_ROLES + CHILD_ROLES:
            raise UnsupportedFormatError(f"{path}: unknown role {img.role!r} for {img.id!r}")
        seen.add(img.id)
        images.append(img)

    if "pairs" in doc and doc["pairs"] is not None:
        pairs = []
        for entry in doc["pairs"]:
            pid, cid = str(entry["parent_id"]), str(entry["child_id"])
            for ref in (pid, cid):
                if ref not in seen:
                    raise UnsupportedFormatError(
                        f"{path}: pair references missing image id {ref!r}"
                    )
            relation = entry.get("relation")
            if relation is None:
                by_id = {img.id: img for img in images}
                relation = relation_for(by_id[pid].role, by_id[cid].role)
            if relation not in RELATIONS:
                raise UnsupportedFormatError(f"{path}: unknown relation {relation!r}")
            pairs.append(ManifestPair(pid, cid, relation))
    else:
        pairs = _derive_pairs(images)

    return DatasetManifest(
        name=str(doc.get("name", path.stem)),
        images=tuple(images),
        pairs=tuple(pairs),
        base_dir=path.parent,
    )


def _derive_pairs(images: list[ManifestImage]) -> list[ManifestPair]:
    by_family: dict[str, list[ManifestImage]] = {}
    family_order = []
    for img in images:
        if img.family_id not in by_family:
            family_order.append(img.family_id)
        by_family.setdefault(img.family_id, []).append(img)
    pairs = []
    for fam in family_order:
        members = by_family[fam]
        parents = [m for m in members if m.role in PARENT_ROLES]
        children = [m for m in members if m.role in CHILD_ROLES]
        for p in parents:
            for c in children:
                pairs.append(ManifestPair(p.id, c.id, relation_for(p.role, c.role)))
    return pairs


def generate_folds(manifest: DatasetManifest, k: int, seed: int) -> FoldAssignment:
    """Deal families into k folds: seeded SplitMix64 shuffle, then round-robin.

    Splitting is by family, so fold sizes differ by at most one family and
    no family straddles folds.
    """
    families = manifest.families()
    if k < 2 or k > len(families):
        raise InvalidArgumentError(f"need 2 <= k <= {len(families)} families, got k={k}")
    rng = Rng(seed)
    rng.shuffle(families)
    return FoldAssignment(k=k, seed=seed, assignment={f: i % k for i, f in enumerate(families)})


def positive_pairs(manifest: DatasetManifest, folds: FoldAssignment) -> list[PairEntry]:
    """Kin pairs labeled with the fold of the parent's family."""
    return [
        PairEntry(
            parent_id=p.parent_id,
            child_id=p.child_id,
            label=KIN,
            relation=p.relation,
            fold=folds.assignment[manifest.family_of(p.parent_id)],
        )
        for p in manifest.pairs
    ]


def generate_negative_pairs(
    positives: list[PairEntry], manifest: DatasetManifest, seed: int
) -> list[PairEntry]:
    """One cross-family negative per positive via a seeded derangement.

    Children are reassigned by a permutation with family(child) !=
    family(parent) at every index: rejection-sample seeded shuffles, then
    fall back to a rotation of the family-sorted order (valid whenever no
    family holds more than half the positives).
    """
    n = len(positives)
    if n < 2:
        raise ProtocolError("need at least 2 positives to build negatives")
    fams = [manifest.family_of(p.parent_id) for p in positives]
    counts: dict[str, int] = {}
    for f in fams:
        counts[f] = counts.get(f, 0) + 1
    if len(counts) < 2:
        raise ProtocolError("all positives share one family; negatives impossible")
    if max(counts.values()) * 2 > n:
        raise ProtocolError(
            "one family holds more than half the positives; a cross-family "
            "derangement does not exist"
        )

    rng = Rng(seed)
    perm = None
    for _ in range(100):
        cand = list(range(n))
        rng.shuffle(cand)
        if all(fams[cand[i]] != fams[i] for i in range(n)):
            perm = cand
            break
    if perm is None:
        perm = _rotation_derangement(fams, counts, rng)

    negatives = []
    for i, pos in enumerate(positives):
        child_id = positives[perm[i]].child_id
        negatives.append(
            PairEntry(
                parent_id=pos.parent_id,
                child_id=child_id,
                label=NON_KIN,
                relation=relation_for(
                    manifest.role_of(pos.parent_id), manifest.role_of(child_id)
                ),
                fold=pos.fold,
            )
        )
    return negatives


def _rotation_derangement(fams: list[str], counts: dict[str, int], rng: Rng) -> list[int]:
    # Order indices into contiguous family blocks, largest family first,
    # then rotate by the largest block size: no index can land in its own
    # block because every block is at most that long and blocks are
    # contiguous (no wrap-around within a block).
    groups: dict[str, list[int]] = {}
    for i, f in enumerate(fams):
        groups.setdefault(f, []).append(i)
    fam_order = sorted(groups, key=lambda f: (-counts[f], f))
    layout: list[int] = []
    for f in fam_order:
        idxs = groups[f]
        rng.shuffle(idxs)
        layout.extend(idxs)
    shift = counts[fam_order[0]]
    n = len(fams)
    perm = [0] * n
    for pos in range(n):
        perm[layout[pos]] = layout[(pos + shift) % n]
    return perm


def write_feature_file(blocks, path, mode1: int | None = None, mode2: int | None = None) -> None:
    """Write FeatureBlocks in the KFV1 container (little-endian, f32).

    Layout: magic "KFV1", u32 version=1, u32 n_samples, u32 mode1, u32
    mode2, u8 dtype (0 = IEEE-754 f32), 3 pad bytes; then per sample a u16
    id length, the UTF-8 id, and mode2 column slices of mode1 floats.
    """
    blocks = list(blocks)
    if blocks:
        m1, m2 = blocks[0].data.shape
        for b in blocks:
            if b.data.shape != (m1, m2):
                raise InvalidArgumentError(
                    f"block {b.sample_id!r} has shape {b.data.shape}, expected {(m1, m2)}"
                )
        if mode1 is not None and (m1, m2) != (mode1, mode2):
            raise InvalidArgumentError("explicit dims do not match block dims")
    else:
        m1, m2 = (mode1 or 0, mode2 or 0)

    chunks = [_KFV_HEADER.pack(_KFV_MAGIC, 1, len(blocks), m1, m2, 0)]
    for b in blocks:
        ident = b.sample_id.encode("utf-8")
        if len(ident) > 0xFFFF:
            raise InvalidArgumentError(f"sample id too long: {b.sample_id!r}")
        chunks.append(struct.pack("<H", len(ident)))
        chunks.append(ident)
        chunks.append(b.data.astype("<f4", copy=False).tobytes(order="F"))
    try:
        Path(path).write_bytes(b"".join(chunks))
    except OSError as exc:
        raise FileAccessError(f"{path}: cannot write feature file") from exc


def read_feature_file(path) -> list[FeatureBlock]:
    """Read a KFV1 container; inverse of write_feature_file, bit-exact."""
    try:
        buf = Path(path).read_bytes()
    except OSError as exc:
        raise FileAccessError(f"{path}: cannot read feature file") from exc
    if len(buf) < _KFV_HEADER.size:
        raise UnsupportedFormatError(f"{path}: truncated header")
    magic, version, n_samples, m1, m2, dtype = _KFV_HEADER.unpack_from(buf, 0)
    if magic != _KFV_MAGIC:
        raise UnsupportedFormatError(f"{path}: bad magic {magic!r}")
    if version != 1:
        raise UnsupportedFormatError(f"{path}: unsupported version {version}")
    if dtype != 0:
        raise UnsupportedFormatError(f"{path}: unsupported dtype code {dtype}")

    offset = _KFV_HEADER.size
    values_size = m1 * m2 * 4
    blocks = []
    for _ in range(n_samples):
        if offset + 2 > len(buf):
            raise UnsupportedFormatError(f"{path}: truncated sample header")
        (id_len,) = struct.unpack_from("<H", buf, offset)
        offset += 2
        if offset + id_len + values_size > len(buf):
            raise UnsupportedFormatError(f"{path}: truncated sample data")
        ident = buf[offset : offset + id_len].decode("utf-8")
        offset += id_len
        values = np.frombuffer(buf, dtype="<f4", count=m1 * m2, offset=offset)
        offset += values_size
        blocks.append(FeatureBlock(sample_id=ident, data=values.reshape((m2, m1)).T))
    if offset != len(buf):
        raise UnsupportedFormatError(f"{path}: {len(buf) - offset} trailing bytes")
    return blocks


def assemble_tensor(blocks, layout: tuple[int, int] | None = None) -> np.ndarray:
    """Stack FeatureBlocks into a third-order tensor (mode1, mode2, samples).

    Slice n along mode 3 equals block n exactly; input order is preserved.
    """
    blocks = list(blocks)
    if not blocks:
        raise InvalidArgumentError("cannot assemble a tensor from zero blocks")
    m1, m2 = blocks[0].data.shape
    if layout is not None and (m1, m2) != tuple(layout):
        raise InvalidArgumentError(f"blocks are {(m1, m2)}, expected layout {tuple(layout)}")
    out = np.empty((m1, m2, len(blocks)), dtype=np.float64)
    for i, b in enumerate(blocks):
        if b.data.shape != (m1, m2):
            raise InvalidArgumentError(
                f"block {b.sample_id!r} has shape {b.data.shape}, expected {(m1, m2)}"
            )
        out[:, :, i] = b.data
    return out


def baseline_features(img: imaging.Image, mode: str, sample_id: str = "") -> FeatureBlock:
    """Ablation-baseline features of the 64x64-resized grayscale image.

    mode "raw" flattens the pixels (4096 x 1); mode "histogram" counts
    nearest-integer intensities into 256 bins (256 x 1).
    """
    gray = imaging.to_grayscale(img) if img.channels == 3 else img
    resized = imaging.resize_bilinear(gray, _BASELINE_SIZE, _BASELINE_SIZE)
    plane = resized.planes[0]
    if mode == "raw":
        data = plane.reshape(-1, 1)
    elif mode == "histogram":
        bins = np.clip(np.rint(plane), 0, 255).astype(np.int64)
        data = np.bincount(bins.ravel(), minlength=256).astype(np.float64).reshape(-1, 1)
    else:
        raise InvalidArgumentError(f"unknown baseline mode {mode!r}")
    return FeatureBlock(sample_id=sample_id, data=data)

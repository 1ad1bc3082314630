"""Command-line pipeline: enhancement, feature extraction, protocol
construction, per-fold training/scoring/evaluation, and score fusion.

Every stage reads and writes files under the run directory, so re-running a
later stage from cached intermediates reproduces the chained run exactly,
and a fixed seed makes the whole `run` byte-reproducible.
"""

from __future__ import annotations

import json
import sys
from dataclasses import dataclass, replace
from pathlib import Path

import click
import numpy as np

from . import __version__
from .dataset import (
    KIN,
    DatasetManifest,
    FeatureBlock,
    FoldAssignment,
    PairEntry,
    baseline_features,
    generate_folds,
    generate_negative_pairs,
    parse_manifest,
    positive_pairs,
    read_feature_file,
    write_feature_file,
)
from .errors import (
    FileAccessError,
    InvalidArgumentError,
    KinverifyError,
    NumericalError,
    ProtocolError,
    StageError,
    UnsupportedFormatError,
)
from .fusion import fit_logistic, fuse, save_lr_model
from .imaging import MsrParams, load_image, msr_enhance, resize_bilinear, save_image, to_grayscale
from .lpq import BlockGrid, lpq_multiscale
from .rng import mix_seed
from .scoring import evaluate, export_roc, score_pairs, select_threshold
from .subspace import TxqdaParams, load_model, project, save_model, train_txqda

FEATURE_KINDS = ("raw", "histogram", "lpq", "deep")

EXIT_CODES = {
    InvalidArgumentError: 2,
    FileAccessError: 3,
    UnsupportedFormatError: 4,
    ProtocolError: 5,
    NumericalError: 6,
}
_EXIT_OTHER = 10


@dataclass(frozen=True)
class RunConfig:
    """Everything the all-in-one `run` needs; JSON-loadable, flag-overridable."""

    manifest: str
    out: str
    seed: int = 0
    feature_kind: str = "lpq"
    msr_enabled: bool = True
    msr_scales: tuple[float, ...] = (15.0, 80.0, 250.0)
    msr_weights: tuple[float, ...] | None = None
    msr_clip: tuple[float, float] = (1.0, 99.0)
    lpq_scales: tuple[int, ...] = (3,)
    grid_rows: int = 4
    grid_cols: int = 3
    lpq_size: int = 128
    k: int = 5
    out1: int | None = None
    out2: int | None = None
    iters: int = 5
    reg_eps: float = 1e-3
    wccn_eps: float = 1e-6
    tol: float | None = None
    deep_features: str | None = None
    fuse_with_deep: bool = False

    def msr_params(self) -> MsrParams:
        weights = self.msr_weights or tuple(1.0 for _ in self.msr_scales)
        return MsrParams(
            scales=self.msr_scales, weights=weights, normalize_percentiles=self.msr_clip
        )

    def txqda_params(self, fold: int) -> TxqdaParams:
        return TxqdaParams(
            out1=self.out1,
            out2=self.out2,
            iters=self.iters,
            reg_eps=self.reg_eps,
            wccn_eps=self.wccn_eps,
            seed=mix_seed(self.seed, fold, 101),
            tol=self.tol,
        )


def _stage(name, fn, *args, **kwargs):
    try:
        return fn(*args, **kwargs)
    except StageError:
        raise
    except KinverifyError as exc:
        raise StageError(name, str(exc)) from exc


def _write_json(path: Path, doc) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(doc, sort_keys=True, indent=2) + "\n", encoding="utf-8")


def _read_json(path: Path):
    try:
        return json.loads(Path(path).read_text(encoding="utf-8"))
    except OSError as exc:
        raise FileAccessError(f"{path}: cannot read") from exc
    except json.JSONDecodeError as exc:
        raise UnsupportedFormatError(f"{path}: invalid JSON") from exc


# ---------------------------------------------------------------------------
# stages
# ---------------------------------------------------------------------------


def stage_enhance(manifest: DatasetManifest, out_dir: Path, params: MsrParams) -> Path:
    """Write MSR-enhanced copies of every image plus an updated manifest."""
    images_dir = out_dir / "images"
    images_dir.mkdir(parents=True, exist_ok=True)
    entries = []
    for img in manifest.images:
        enhanced = msr_enhance(load_image(manifest.image_path(img.id)), params)
        save_image(enhanced, images_dir / f"{img.id}.png")
        entry = {
            "id": img.id,
            "path": f"images/{img.id}.png",
            "role": img.role,
            "family_id": img.family_id,
        }
        if img.subset is not None:
            entry["subset"] = img.subset
        entries.append(entry)
    doc = {"schema": 1, "name": manifest.name + "+msr", "images": entries}
    manifest_path = out_dir / "manifest.json"
    _write_json(manifest_path, doc)
    return manifest_path


def stage_features(manifest: DatasetManifest, out_path: Path, config: RunConfig) -> Path:
    """Extract per-image FeatureBlocks for the configured kind into KFV1."""
    kind = config.feature_kind
    if kind == "deep":
        if not config.deep_features:
            raise FileAccessError("deep feature kind needs --deep-features FILE")
        source = Path(config.deep_features)
        if not source.exists():
            raise FileAccessError(f"{source}: deep feature file missing")
        blocks = read_feature_file(source)
        known = {b.sample_id for b in blocks}
        missing = [img.id for img in manifest.images if img.id not in known]
        if missing:
            raise ProtocolError(f"deep feature file lacks ids: {', '.join(missing[:5])}")
        order = {img.id: i for i, img in enumerate(manifest.images)}
        blocks = sorted(
            (b for b in blocks if b.sample_id in order), key=lambda b: order[b.sample_id]
        )
    else:
        blocks = []
        grid = BlockGrid(config.grid_rows, config.grid_cols)
        for img in manifest.images:
            image = load_image(manifest.image_path(img.id))
            if kind in ("raw", "histogram"):
                blocks.append(baseline_features(image, kind, sample_id=img.id))
            elif kind == "lpq":
                gray = resize_bilinear(to_grayscale(image), config.lpq_size, config.lpq_size)
                blocks.append(
                    lpq_multiscale(
                        gray.planes[0], config.lpq_scales, grid, sample_id=img.id
                    )
                )
            else:
                raise InvalidArgumentError(f"unknown feature kind {kind!r}")
    out_path.parent.mkdir(parents=True, exist_ok=True)
    write_feature_file(blocks, out_path)
    return out_path


def stage_folds(manifest: DatasetManifest, out_path: Path, k: int, seed: int) -> FoldAssignment:
    folds = generate_folds(manifest, k, seed)
    _write_json(out_path, {"schema": 1, "k": k, "seed": seed, "assignment": folds.assignment})
    return folds


def load_folds(path: Path) -> FoldAssignment:
    doc = _read_json(path)
    if doc.get("schema") != 1:
        raise UnsupportedFormatError(f"{path}: expected folds schema 1")
    return FoldAssignment(
        k=int(doc["k"]),
        seed=int(doc["seed"]),
        assignment={str(f): int(i) for f, i in doc["assignment"].items()},
    )


def stage_pairs(
    manifest: DatasetManifest, folds: FoldAssignment, out_path: Path, seed: int
) -> list[PairEntry]:
    """All positives plus per-fold balanced negatives, in protocol order."""
    positives = positive_pairs(manifest, folds)
    entries = list(positives)
    for f in range(folds.k):
        fold_pos = [p for p in positives if p.fold == f]
        if not fold_pos:
            continue
        entries.extend(generate_negative_pairs(fold_pos, manifest, mix_seed(seed, f, 7)))
    doc = {
        "schema": 1,
        "seed": seed,
        "entries": [
            {
                "parent_id": p.parent_id,
                "child_id": p.child_id,
                "label": p.label,
                "relation": p.relation,
                "fold": p.fold,
            }
            for p in entries
        ],
    }
    _write_json(out_path, doc)
    return entries


def load_pairs(path: Path) -> list[PairEntry]:
    doc = _read_json(path)
    if doc.get("schema") != 1:
        raise UnsupportedFormatError(f"{path}: expected pairs schema 1")
    return [
        PairEntry(
            parent_id=e["parent_id"],
            child_id=e["child_id"],
            label=e["label"],
            relation=e["relation"],
            fold=int(e["fold"]),
        )
        for e in doc["entries"]
    ]


def tensorize(block: FeatureBlock, kind: str, grid_blocks: int) -> np.ndarray:
    """Per-sample matrix fed to the multilinear stage.

    Single-scale LPQ vectors become bins x blocks so both modes stay
    meaningful; raw pixel vectors become the 64x64 image grid; everything
    else keeps its native (mode1, mode2) layout.
    """
    data = block.data.astype(np.float64)
    m1, m2 = data.shape
    if kind == "lpq" and m2 == 1 and m1 == 256 * grid_blocks:
        return data[:, 0].reshape((256, grid_blocks), order="F")
    if kind == "raw" and m2 == 1 and m1 == 4096:
        return data[:, 0].reshape((64, 64))
    return data


def stage_train(
    manifest: DatasetManifest,
    features_path: Path,
    folds: FoldAssignment,
    models_dir: Path,
    config: RunConfig,
) -> list[Path]:
    """Train one projection model per fold on all other folds' families."""
    blocks = {b.sample_id: b for b in read_feature_file(features_path)}
    grid_blocks = config.grid_rows * config.grid_cols
    models_dir.mkdir(parents=True, exist_ok=True)
    paths = []
    for fold in range(folds.k):
        train_families = {f for f, i in folds.assignment.items() if i != fold}
        parents, parent_fams, children, child_fams = [], [], [], []
        for img in manifest.images:
            if img.family_id not in train_families:
                continue
            if img.id not in blocks:
                raise ProtocolError(f"feature file lacks sample {img.id!r}")
            matrix = tensorize(blocks[img.id], config.feature_kind, grid_blocks)
            if img.role in ("father", "mother", "parent"):
                parents.append(matrix)
                parent_fams.append(img.family_id)
            else:
                children.append(matrix)
                child_fams.append(img.family_id)
        if not parents or not children:
            raise ProtocolError(f"fold {fold}: training views are empty")
        x = np.stack(parents, axis=2)
        z = np.stack(children, axis=2)
        model = train_txqda(x, z, parent_fams, child_fams, config.txqda_params(fold))
        path = models_dir / f"fold{fold}.kfm"
        save_model(model, path)
        paths.append(path)
    return paths


def stage_score(
    manifest: DatasetManifest,
    features_path: Path,
    folds: FoldAssignment,
    pairs: list[PairEntry],
    models_dir: Path,
    scores_dir: Path,
    config: RunConfig,
) -> list[Path]:
    """Project every image through each fold's model and score its pairs."""
    blocks = {b.sample_id: b for b in read_feature_file(features_path)}
    grid_blocks = config.grid_rows * config.grid_cols
    scores_dir.mkdir(parents=True, exist_ok=True)
    paths = []
    for fold in range(folds.k):
        model = load_model(models_dir / f"fold{fold}.kfm")
        vectors = {}
        for img in manifest.images:
            if img.id not in blocks:
                raise ProtocolError(f"feature file lacks sample {img.id!r}")
            matrix = tensorize(blocks[img.id], config.feature_kind, grid_blocks)
            vectors[img.id] = project(matrix, model)
        doc = {"schema": 1, "fold": fold, "train": [], "test": []}
        for p in pairs:
            bucket = doc["test"] if p.fold == fold else doc["train"]
            score = score_pairs(
                vectors,
                [(p.parent_id, p.child_id)],
                warn=lambda msg: click.echo(f"warning: {msg}", err=True),
            )[0]
            parent = manifest.image_by_id(p.parent_id)
            child = manifest.image_by_id(p.child_id)
            bucket.append(
                {
                    "parent_id": p.parent_id,
                    "child_id": p.child_id,
                    "label": p.label,
                    "relation": p.relation,
                    "fold": p.fold,
                    "subset": parent.subset or child.subset,
                    "score": score,
                }
            )
        path = scores_dir / f"fold{fold}.json"
        _write_json(path, doc)
        paths.append(path)
    return paths


def _metrics_from_entries(train_entries, test_entries):
    train_scores = [e["score"] for e in train_entries]
    train_labels = [e["label"] == KIN for e in train_entries]
    threshold = select_threshold(train_scores, train_labels)
    test_scores = [e["score"] for e in test_entries]
    test_labels = [e["label"] == KIN for e in test_entries]
    return evaluate(test_scores, test_labels, threshold)


def _breakdown(entries, key) -> dict:
    """Pooled accuracy by relation/subset, each pair judged at its fold's
    threshold (already applied into `correct`)."""
    out = {}
    for e in entries:
        tag = e.get(key)
        if tag is None:
            continue
        slot = out.setdefault(tag, {"n": 0, "correct": 0})
        slot["n"] += 1
        slot["correct"] += int(e["correct"])
    return {
        tag: {"n": slot["n"], "accuracy": slot["correct"] / slot["n"]}
        for tag, slot in sorted(out.items())
    }


def stage_evaluate(
    scores_dir: Path, folds_k: int, report_path: Path, feature_kind: str, seed: int
) -> dict:
    """Per-fold threshold selection and metrics, ROC CSVs, and the report."""
    report_path.parent.mkdir(parents=True, exist_ok=True)
    fold_rows = []
    pooled_test = []
    for fold in range(folds_k):
        doc = _read_json(scores_dir / f"fold{fold}.json")
        metrics = _metrics_from_entries(doc["train"], doc["test"])
        export_roc(metrics, report_path.parent / f"roc_fold{fold}.csv")
        for e in doc["test"]:
            e["correct"] = (e["score"] >= metrics.threshold) == (e["label"] == KIN)
            pooled_test.append(e)
        fold_rows.append(
            {
                "fold": fold,
                "threshold": metrics.threshold,
                "accuracy": metrics.accuracy,
                "auc": metrics.auc,
                "eer": metrics.eer,
                "n_train_pairs": len(doc["train"]),
                "n_test_pairs": len(doc["test"]),
            }
        )
    report = {
        "schema": 1,
        "feature_kind": feature_kind,
        "seed": seed,
        "folds": fold_rows,
        "mean_accuracy": sum(r["accuracy"] for r in fold_rows) / len(fold_rows),
        "mean_auc": sum(r["auc"] for r in fold_rows) / len(fold_rows),
        "mean_eer": sum(r["eer"] for r in fold_rows) / len(fold_rows),
        "relations": _breakdown(pooled_test, "relation"),
        "subsets": _breakdown(pooled_test, "subset"),
    }
    _write_json(report_path, report)
    return report


def stage_fuse(
    scores_dir_a: Path,
    scores_dir_b: Path,
    folds_k: int,
    out_dir: Path,
    l2_lambda: float,
    seed: int,
) -> dict:
    """Per-fold logistic fusion of two modalities' scores."""
    out_dir.mkdir(parents=True, exist_ok=True)
    fold_rows = []
    pooled_test = []
    for fold in range(folds_k):
        doc_a = _read_json(scores_dir_a / f"fold{fold}.json")
        doc_b = _read_json(scores_dir_b / f"fold{fold}.json")
        fused_split = {}
        lr_model = None
        for split in ("train", "test"):
            index_b = {(e["parent_id"], e["child_id"]): e for e in doc_b[split]}
            rows = []
            for e in doc_a[split]:
                key = (e["parent_id"], e["child_id"])
                if key not in index_b:
                    raise ProtocolError(
                        f"fold {fold}: pair {key} missing from second modality"
                    )
                rows.append((e, [e["score"], index_b[key]["score"]]))
            if split == "train":
                scores = np.array([s for _, s in rows])
                labels = np.array([float(e["label"] == KIN) for e, _ in rows])
                lr_model = fit_logistic(scores, labels, l2_lambda=l2_lambda)
                save_lr_model(lr_model, out_dir / f"fusion_fold{fold}.json")
            fused_split[split] = [
                dict(e, score=fuse(lr_model, s)) for e, s in rows
            ]
        metrics = _metrics_from_entries(fused_split["train"], fused_split["test"])
        export_roc(metrics, out_dir / f"roc_fold{fold}.csv")
        for e in fused_split["test"]:
            e["correct"] = (e["score"] >= metrics.threshold) == (e["label"] == KIN)
            pooled_test.append(e)
        fold_rows.append(
            {
                "fold": fold,
                "threshold": metrics.threshold,
                "accuracy": metrics.accuracy,
                "auc": metrics.auc,
                "eer": metrics.eer,
                "n_train_pairs": len(fused_split["train"]),
                "n_test_pairs": len(fused_split["test"]),
            }
        )
    report = {
        "schema": 1,
        "feature_kind": "fused",
        "seed": seed,
        "folds": fold_rows,
        "mean_accuracy": sum(r["accuracy"] for r in fold_rows) / len(fold_rows),
        "mean_auc": sum(r["auc"] for r in fold_rows) / len(fold_rows),
        "mean_eer": sum(r["eer"] for r in fold_rows) / len(fold_rows),
        "relations": _breakdown(pooled_test, "relation"),
        "subsets": _breakdown(pooled_test, "subset"),
    }
    _write_json(out_dir / "report.json", report)
    return report


def run_pipeline(config: RunConfig) -> dict:
    """Execute the full pipeline per the config; returns the final report."""
    out = Path(config.out)
    out.mkdir(parents=True, exist_ok=True)
    manifest = _stage("manifest", parse_manifest, config.manifest)

    if config.msr_enabled:
        enhanced_manifest = _stage(
            "enhance", stage_enhance, manifest, out / "enhanced", config.msr_params()
        )
        manifest = _stage("manifest", parse_manifest, enhanced_manifest)

    folds = _stage("folds", stage_folds, manifest, out / "folds.json", config.k, config.seed)
    pairs = _stage(
        "pairs", stage_pairs, manifest, folds, out / "pairs.json", config.seed
    )

    kinds = [config.feature_kind]
    if config.fuse_with_deep:
        if config.feature_kind == "deep":
            raise StageError("fuse", "fusion needs a shallow kind plus deep features")
        kinds.append("deep")

    reports = {}
    for kind in kinds:
        kind_config = replace(config, feature_kind=kind)
        features = _stage(
            "features",
            stage_features,
            manifest,
            out / "features" / f"{kind}.kfv",
            kind_config,
        )
        _stage(
            "train",
            stage_train,
            manifest,
            features,
            folds,
            out / "models" / kind,
            kind_config,
        )
        _stage(
            "score",
            stage_score,
            manifest,
            features,
            folds,
            pairs,
            out / "models" / kind,
            out / "scores" / kind,
            kind_config,
        )
        reports[kind] = _stage(
            "evaluate",
            stage_evaluate,
            out / "scores" / kind,
            folds.k,
            out / "reports" / kind / "report.json",
            kind,
            config.seed,
        )

    if config.fuse_with_deep:
        reports["fused"] = _stage(
            "fuse",
            stage_fuse,
            out / "scores" / kinds[0],
            out / "scores" / "deep",
            folds.k,
            out / "reports" / "fused",
            1e-3,
            config.seed,
        )
        return reports["fused"]
    return reports[config.feature_kind]


# ---------------------------------------------------------------------------
# command line
# ---------------------------------------------------------------------------


def _exit_code(exc: KinverifyError) -> int:
    cause = exc.__cause__ if isinstance(exc, StageError) else exc
    for klass, code in EXIT_CODES.items():
        if isinstance(cause, klass):
            return code
    return _EXIT_OTHER


def _run_guarded(fn, *args, **kwargs):
    try:
        return fn(*args, **kwargs)
    except KinverifyError as exc:
        click.echo(f"error: {exc}", err=True)
        sys.exit(_exit_code(exc))


def _parse_floats(text: str) -> tuple[float, ...]:
    return tuple(float(part) for part in text.split(","))


def _parse_ints(text: str) -> tuple[int, ...]:
    return tuple(int(part) for part in text.split(","))


def _parse_grid(text: str) -> tuple[int, int]:
    rows, cols = text.lower().split("x")
    return int(rows), int(cols)


@click.group()
@click.version_option(version=__version__)
def main():
    """Kinship verification pipeline: enhance, extract, split, train,
    score, evaluate, fuse."""


@main.command("make-demo")
@click.option("--out", required=True, type=click.Path())
@click.option("--families", default=12, show_default=True)
@click.option("--size", default=48, show_default=True, help="Image side length in pixels.")
@click.option("--seed", default=7, show_default=True)
def cmd_make_demo(out, families, size, seed):
    """Generate the bundled synthetic demo dataset."""
    from .synthdata import write_demo_dataset

    path = _run_guarded(write_demo_dataset, out, families, size, seed)
    click.echo(f"manifest: {path}")


@main.command("enhance")
@click.option("--manifest", "manifest_path", required=True, type=click.Path())
@click.option("--out", required=True, type=click.Path())
@click.option("--msr-scales", default="15,80,250", show_default=True)
@click.option("--msr-weights", default=None)
@click.option("--msr-clip", default="1,99", show_default=True, help="low,high percentiles")
def cmd_enhance(manifest_path, out, msr_scales, msr_weights, msr_clip):
    """Apply multiscale retinex to every image in the manifest."""

    def go():
        scales = _parse_floats(msr_scales)
        weights = _parse_floats(msr_weights) if msr_weights else tuple(1.0 for _ in scales)
        low, high = _parse_floats(msr_clip)
        params = MsrParams(scales=scales, weights=weights, normalize_percentiles=(low, high))
        manifest = parse_manifest(manifest_path)
        return _stage("enhance", stage_enhance, manifest, Path(out), params)

    path = _run_guarded(go)
    click.echo(f"manifest: {path}")


@main.command("extract-lpq")
@click.option("--manifest", "manifest_path", required=True, type=click.Path())
@click.option("--out", required=True, type=click.Path())
@click.option("--scales", default="3,4,5,6,7,8,9", show_default=True)
@click.option("--grid", default="4x3", show_default=True)
@click.option("--size", default=128, show_default=True)
def cmd_extract_lpq(manifest_path, out, scales, grid, size):
    """Extract multi-scale LPQ block histograms into a KFV1 container."""

    def go():
        rows, cols = _parse_grid(grid)
        config = RunConfig(
            manifest=manifest_path,
            out=str(Path(out).parent),
            feature_kind="lpq",
            lpq_scales=_parse_ints(scales),
            grid_rows=rows,
            grid_cols=cols,
            lpq_size=size,
        )
        manifest = parse_manifest(manifest_path)
        return _stage("features", stage_features, manifest, Path(out), config)

    path = _run_guarded(go)
    click.echo(f"features: {path}")


@main.command("baseline")
@click.option("--manifest", "manifest_path", required=True, type=click.Path())
@click.option("--out", required=True, type=click.Path())
@click.option("--mode", type=click.Choice(["raw", "histogram"]), required=True)
def cmd_baseline(manifest_path, out, mode):
    """Extract raw-pixel or intensity-histogram baseline features."""

    def go():
        config = RunConfig(
            manifest=manifest_path, out=str(Path(out).parent), feature_kind=mode
        )
        manifest = parse_manifest(manifest_path)
        return _stage("features", stage_features, manifest, Path(out), config)

    path = _run_guarded(go)
    click.echo(f"features: {path}")


@main.command("make-folds")
@click.option("--manifest", "manifest_path", required=True, type=click.Path())
@click.option("--out", required=True, type=click.Path())
@click.option("--k", default=5, show_default=True)
@click.option("--seed", default=0, show_default=True)
def cmd_make_folds(manifest_path, out, k, seed):
    """Deal families into k folds."""

    def go():
        manifest = parse_manifest(manifest_path)
        return _stage("folds", stage_folds, manifest, Path(out), k, seed)

    folds = _run_guarded(go)
    click.echo(f"folds: {out} ({folds.k} folds)")


@main.command("make-pairs")
@click.option("--manifest", "manifest_path", required=True, type=click.Path())
@click.option("--folds", "folds_path", required=True, type=click.Path())
@click.option("--out", required=True, type=click.Path())
@click.option("--seed", default=0, show_default=True)
def cmd_make_pairs(manifest_path, folds_path, out, seed):
    """Emit labeled kin/non-kin pairs for every fold."""

    def go():
        manifest = parse_manifest(manifest_path)
        folds = load_folds(Path(folds_path))
        return _stage("pairs", stage_pairs, manifest, folds, Path(out), seed)

    pairs = _run_guarded(go)
    click.echo(f"pairs: {out} ({len(pairs)} entries)")


_train_options = [
    click.option("--manifest", "manifest_path", required=True, type=click.Path()),
    click.option("--features", "features_path", required=True, type=click.Path()),
    click.option("--folds", "folds_path", required=True, type=click.Path()),
    click.option("--kind", type=click.Choice(FEATURE_KINDS), default="lpq", show_default=True),
    click.option("--grid", default="4x3", show_default=True),
]


def _apply_options(options):
    def wrap(fn):
        for option in reversed(options):
            fn = option(fn)
        return fn

    return wrap


@main.command("train")
@_apply_options(_train_options)
@click.option("--out", required=True, type=click.Path(), help="Model output directory.")
@click.option("--out1", default=None, type=int)
@click.option("--out2", default=None, type=int)
@click.option("--iters", default=5, show_default=True)
@click.option("--reg-eps", default=1e-3, show_default=True)
@click.option("--wccn-eps", default=1e-6, show_default=True)
@click.option("--tol", default=None, type=float)
@click.option("--seed", default=0, show_default=True)
def cmd_train(
    manifest_path, features_path, folds_path, kind, grid, out,
    out1, out2, iters, reg_eps, wccn_eps, tol, seed,
):
    """Train one TXQDA+WCCN projection model per fold."""

    def go():
        rows, cols = _parse_grid(grid)
        config = RunConfig(
            manifest=manifest_path, out=out, seed=seed, feature_kind=kind,
            grid_rows=rows, grid_cols=cols, out1=out1, out2=out2, iters=iters,
            reg_eps=reg_eps, wccn_eps=wccn_eps, tol=tol,
        )
        manifest = parse_manifest(manifest_path)
        folds = load_folds(Path(folds_path))
        return _stage(
            "train", stage_train, manifest, Path(features_path), folds, Path(out), config
        )

    paths = _run_guarded(go)
    click.echo(f"models: {len(paths)} written")


@main.command("score")
@_apply_options(_train_options)
@click.option("--pairs", "pairs_path", required=True, type=click.Path())
@click.option("--models", "models_dir", required=True, type=click.Path())
@click.option("--out", required=True, type=click.Path(), help="Scores output directory.")
def cmd_score(manifest_path, features_path, folds_path, kind, grid, pairs_path, models_dir, out):
    """Score all pairs with each fold's model (cosine similarity)."""

    def go():
        rows, cols = _parse_grid(grid)
        config = RunConfig(
            manifest=manifest_path, out=out, feature_kind=kind, grid_rows=rows, grid_cols=cols
        )
        manifest = parse_manifest(manifest_path)
        folds = load_folds(Path(folds_path))
        pairs = load_pairs(Path(pairs_path))
        return _stage(
            "score", stage_score, manifest, Path(features_path), folds, pairs,
            Path(models_dir), Path(out), config,
        )

    paths = _run_guarded(go)
    click.echo(f"scores: {len(paths)} folds written")


@main.command("evaluate")
@click.option("--scores", "scores_dir", required=True, type=click.Path())
@click.option("--k", default=5, show_default=True)
@click.option("--out", required=True, type=click.Path(), help="Report JSON path.")
@click.option("--kind", default="lpq", show_default=True)
@click.option("--seed", default=0, show_default=True)
def cmd_evaluate(scores_dir, k, out, kind, seed):
    """Select per-fold thresholds on training scores and report metrics."""
    report = _run_guarded(
        lambda: _stage(
            "evaluate", stage_evaluate, Path(scores_dir), k, Path(out), kind, seed
        )
    )
    click.echo(f"mean accuracy: {report['mean_accuracy']:.4f}")


@main.command("fuse")
@click.option("--scores-a", required=True, type=click.Path())
@click.option("--scores-b", required=True, type=click.Path())
@click.option("--k", default=5, show_default=True)
@click.option("--out", required=True, type=click.Path(), help="Fusion output directory.")
@click.option("--l2-lambda", default=1e-3, show_default=True)
@click.option("--seed", default=0, show_default=True)
def cmd_fuse(scores_a, scores_b, k, out, l2_lambda, seed):
    """Fuse two modalities' scores with per-fold logistic regression."""
    report = _run_guarded(
        lambda: _stage(
            "fuse", stage_fuse, Path(scores_a), Path(scores_b), k, Path(out), l2_lambda, seed
        )
    )
    click.echo(f"fused mean accuracy: {report['mean_accuracy']:.4f}")


@main.command("run")
@click.option("--config", "config_path", default=None, type=click.Path())
@click.option("--manifest", "manifest_path", default=None, type=click.Path())
@click.option("--out", default=None, type=click.Path())
@click.option("--seed", default=None, type=int)
@click.option("--feature-kind", type=click.Choice(FEATURE_KINDS), default=None)
@click.option("--msr/--no-msr", "msr_enabled", default=None)
@click.option("--msr-scales", default=None)
@click.option("--msr-weights", default=None)
@click.option("--msr-clip", default=None)
@click.option("--scales", default=None, help="LPQ window sizes, comma separated.")
@click.option("--grid", default=None)
@click.option("--size", default=None, type=int)
@click.option("--k", default=None, type=int)
@click.option("--deep-features", default=None, type=click.Path())
@click.option("--fuse", "fuse_with_deep", is_flag=True, default=False)
@click.option("--out1", default=None, type=int)
@click.option("--out2", default=None, type=int)
@click.option("--iters", default=None, type=int)
@click.option("--reg-eps", default=None, type=float)
@click.option("--wccn-eps", default=None, type=float)
@click.option("--tol", default=None, type=float)
def cmd_run(config_path, **overrides):
    """Run the whole pipeline end to end from a manifest."""

    def go():
        doc = {}
        if config_path:
            doc = _read_json(Path(config_path))
            doc.pop("schema", None)
        merged = dict(doc)
        flag_to_field = {
            "manifest_path": "manifest",
            "out": "out",
            "seed": "seed",
            "feature_kind": "feature_kind",
            "msr_enabled": "msr_enabled",
            "msr_scales": "msr_scales",
            "msr_weights": "msr_weights",
            "msr_clip": "msr_clip",
            "scales": "lpq_scales",
            "grid": "grid",
            "size": "lpq_size",
            "k": "k",
            "deep_features": "deep_features",
            "out1": "out1",
            "out2": "out2",
            "iters": "iters",
            "reg_eps": "reg_eps",
            "wccn_eps": "wccn_eps",
            "tol": "tol",
        }
        for flag, value in overrides.items():
            if flag == "fuse_with_deep":
                if value:
                    merged["fuse_with_deep"] = True
                continue
            if value is None:
                continue
            merged[flag_to_field[flag]] = value
        if "manifest" not in merged or "out" not in merged:
            raise InvalidArgumentError("run needs --manifest and --out (or a config file)")
        if isinstance(merged.get("msr_scales"), str):
            merged["msr_scales"] = _parse_floats(merged["msr_scales"])
        if isinstance(merged.get("msr_weights"), str):
            merged["msr_weights"] = _parse_floats(merged["msr_weights"])
        if isinstance(merged.get("msr_clip"), str):
            merged["msr_clip"] = tuple(_parse_floats(merged["msr_clip"]))
        if isinstance(merged.get("lpq_scales"), str):
            merged["lpq_scales"] = _parse_ints(merged["lpq_scales"])
        if "grid" in merged:
            rows, cols = (
                _parse_grid(merged.pop("grid"))
                if isinstance(merged.get("grid"), str)
                else merged.pop("grid")
            )
            merged["grid_rows"], merged["grid_cols"] = rows, cols
        lists_to_tuples = ("msr_scales", "msr_weights", "msr_clip", "lpq_scales")
        for key in lists_to_tuples:
            if isinstance(merged.get(key), list):
                merged[key] = tuple(merged[key])
        config = RunConfig(**merged)
        return run_pipeline(config)

    report = _run_guarded(go)
    click.echo(f"mean accuracy: {report['mean_accuracy']:.4f}")


if __name__ == "__main__":
    main()

"""Kinship verification toolkit.

Pipeline pieces: multiscale retinex enhancement (imaging), multi-scale LPQ
block histograms (lpq), dataset/fold/pair protocol and the KFV1 feature
container (dataset), cross-view tensor discriminant projection with WCCN
(subspace), cosine matching and ROC metrics (scoring), and logistic score
fusion (fusion).  The cli module wires them into an end-to-end 5-fold
verification run.
"""

__version__ = "0.1.0"

from .dataset import (
    DatasetManifest,
    FeatureBlock,
    FoldAssignment,
    PairEntry,
    assemble_tensor,
    baseline_features,
    generate_folds,
    generate_negative_pairs,
    parse_manifest,
    read_feature_file,
    write_feature_file,
)
from .fusion import LrModel, fit_logistic, fuse
from .imaging import Image, MsrParams, load_image, msr_enhance, resize_bilinear, to_grayscale
from .lpq import BlockGrid, LpqParams, block_histograms, lpq_codes, lpq_multiscale
from .scoring import Metrics, cosine_similarity, evaluate, export_roc, select_threshold
from .subspace import (
    ProjectionModel,
    TxqdaParams,
    mode_multiply,
    project,
    train_txqda,
    train_wccn,
    unfold,
)

__all__ = [
    "__version__",
    "DatasetManifest",
    "FeatureBlock",
    "FoldAssignment",
    "PairEntry",
    "assemble_tensor",
    "baseline_features",
    "generate_folds",
    "generate_negative_pairs",
    "parse_manifest",
    "read_feature_file",
    "write_feature_file",
    "LrModel",
    "fit_logistic",
    "fuse",
    "Image",
    "MsrParams",
    "load_image",
    "msr_enhance",
    "resize_bilinear",
    "to_grayscale",
    "BlockGrid",
    "LpqParams",
    "block_histograms",
    "lpq_codes",
    "lpq_multiscale",
    "Metrics",
    "cosine_similarity",
    "evaluate",
    "export_roc",
    "select_threshold",
    "ProjectionModel",
    "TxqdaParams",
    "mode_multiply",
    "project",
    "train_txqda",
    "train_wccn",
    "unfold",
]

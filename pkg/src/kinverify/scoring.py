"""Cosine matching, threshold selection, and accuracy/ROC/AUC/EER metrics.

Scores follow the similarity convention: higher means more likely kin, and
a pair is accepted when score >= threshold.  The ROC sweeps thresholds from
+inf down through every distinct score, so both rates are non-decreasing
along the curve and the area is a plain trapezoid integral.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import FileAccessError, InvalidArgumentError, ProtocolError


@dataclass(frozen=True)
class Metrics:
    """Threshold-point accuracy plus the full sweep summary."""

    accuracy: float
    threshold: float
    roc: tuple[tuple[float, float, float], ...]  # (fpr, tpr, threshold)
    auc: float
    eer: float


def cosine_similarity(u: np.ndarray, v: np.ndarray) -> float:
    """(u . v) / (|u| |v|); raises on a zero-norm input."""
    a = np.asarray(u, dtype=np.float64).ravel()
    b = np.asarray(v, dtype=np.float64).ravel()
    if a.shape != b.shape:
        raise InvalidArgumentError(f"length mismatch: {a.shape} vs {b.shape}")
    norm = np.linalg.norm(a) * np.linalg.norm(b)
    if norm == 0.0:
        raise InvalidArgumentError("cosine similarity undefined for zero-norm vectors")
    return float(np.dot(a, b) / norm)


def _split_scores(scores, labels) -> tuple[np.ndarray, np.ndarray]:
    s = np.asarray(scores, dtype=np.float64)
    y = np.asarray(labels, dtype=bool)
    if s.size == 0:
        raise InvalidArgumentError("no scores given")
    if s.shape != y.shape:
        raise InvalidArgumentError("scores and labels must align")
    if not np.all(np.isfinite(s)):
        raise InvalidArgumentError("scores must be finite")
    return np.sort(s[y]), np.sort(s[~y])


def _accuracy_at(kin_sorted, non_sorted, thresholds) -> np.ndarray:
    t = np.atleast_1d(thresholds)
    tp = len(kin_sorted) - np.searchsorted(kin_sorted, t, side="left")
    tn = np.searchsorted(non_sorted, t, side="left")
    return (tp + tn) / (len(kin_sorted) + len(non_sorted))


def select_threshold(scores, labels) -> float:
    """Training threshold: the accuracy-maximizing candidate.

    Candidates are +-inf and the midpoints of adjacent distinct scores;
    ties resolve to the smallest candidate.
    """
    kin, non = _split_scores(scores, labels)
    if len(kin) == 0 or len(non) == 0:
        raise ProtocolError("threshold selection needs both kin and non-kin scores")
    distinct = np.unique(np.concatenate([kin, non]))
    mids = (distinct[:-1] + distinct[1:]) / 2.0
    candidates = np.concatenate([[-np.inf], mids, [np.inf]])
    accs = _accuracy_at(kin, non, candidates)
    return float(candidates[int(np.argmax(accs))])


def evaluate(scores, labels, threshold: float) -> Metrics:
    """Accuracy at the given threshold plus ROC, AUC and EER.

    The sweep starts at +inf (nothing accepted) and visits each distinct
    score descending; EER interpolates linearly between the bracketing
    sweep points where the false-accept and false-reject rates cross.
    """
    kin, non = _split_scores(scores, labels)
    if len(kin) == 0 or len(non) == 0:
        raise ProtocolError("evaluation needs both kin and non-kin scores")
    accuracy = float(_accuracy_at(kin, non, threshold)[0])
    sweep = np.concatenate([[np.inf], np.unique(np.concatenate([kin, non]))[::-1]])
    tpr = (len(kin) - np.searchsorted(kin, sweep, side="left")) / len(kin)
    fpr = (len(non) - np.searchsorted(non, sweep, side="left")) / len(non)
    auc = float(np.trapezoid(tpr, fpr))
    eer = _interpolate_eer(fpr, tpr)
    roc = tuple((float(f), float(t), float(s)) for f, t, s in zip(fpr, tpr, sweep))
    return Metrics(accuracy=accuracy, threshold=float(threshold), roc=roc, auc=auc, eer=eer)


def _interpolate_eer(fpr: np.ndarray, tpr: np.ndarray) -> float:
    # d = fpr - (1 - tpr) rises monotonically from -1 to +1 along the sweep
    d = fpr + tpr - 1.0
    idx = int(np.searchsorted(d, 0.0, side="left"))
    if d[idx] == 0.0:
        return float(fpr[idx])
    span = d[idx] - d[idx - 1]
    alpha = -d[idx - 1] / span
    return float(fpr[idx - 1] + alpha * (fpr[idx] - fpr[idx - 1]))


def export_roc(metrics: Metrics, path) -> None:
    """CSV `threshold,fpr,tpr`, one line per sweep point, 9 significant digits."""
    lines = ["threshold,fpr,tpr"]
    for fpr, tpr, threshold in metrics.roc:
        lines.append(f"{threshold:.9g},{fpr:.9g},{tpr:.9g}")
    try:
        Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")
    except OSError as exc:
        raise FileAccessError(f"{path}: cannot write ROC CSV") from exc


def read_roc_csv(path) -> list[tuple[float, float, float]]:
    """Parse an exported ROC CSV back into (fpr, tpr, threshold) points."""
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise FileAccessError(f"{path}: cannot read ROC CSV") from exc
    rows = []
    for line in text.strip().splitlines()[1:]:
        threshold, fpr, tpr = (float(part) for part in line.split(","))
        rows.append((fpr, tpr, threshold))
    return rows


def score_pairs(vectors: dict, pairs, warn=None) -> list[float]:
    """Cosine scores for (parent_id, child_id) pairs over projected vectors.

    A zero-norm embedding makes the similarity undefined; those pairs score
    0 and `warn` (if given) is called with a message.
    """
    out = []
    for parent_id, child_id in pairs:
        try:
            out.append(cosine_similarity(vectors[parent_id], vectors[child_id]))
        except InvalidArgumentError:
            if warn is not None:
                warn(f"zero-norm embedding for pair ({parent_id}, {child_id}); scoring 0")
            out.append(0.0)
    return out

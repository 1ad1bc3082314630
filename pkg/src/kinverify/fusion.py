"""Logistic-regression fusion of per-modality match scores.

Fits P(kin | s) = sigmoid(b0 + b . s) by iteratively reweighted least
squares on the L2-penalized log-likelihood (intercept unpenalized), and
fuses score tuples into a single probability used as the final match
score.  Scores are fed raw: the model absorbs affine scale differences
between modalities.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import FileAccessError, InvalidArgumentError, UnsupportedFormatError

_PROB_FLOOR = 1e-12


@dataclass(frozen=True)
class LrModel:
    """Fitted fusion weights: intercept, one weight per modality."""

    beta0: float
    beta: tuple[float, ...]
    l2_lambda: float
    converged: bool
    iterations: int


def _sigmoid(x: np.ndarray) -> np.ndarray:
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    expx = np.exp(x[~pos])
    out[~pos] = expx / (1.0 + expx)
    return out


def penalized_log_likelihood(params: np.ndarray, x: np.ndarray, y: np.ndarray, lam: float) -> float:
    """Log-likelihood minus (lam/2)|weights|^2; the intercept is free."""
    z = params[0] + x @ params[1:]
    p = np.clip(_sigmoid(z), _PROB_FLOOR, 1.0 - _PROB_FLOOR)
    ll = float(np.sum(y * np.log(p) + (1.0 - y) * np.log(1.0 - p)))
    return ll - 0.5 * lam * float(np.dot(params[1:], params[1:]))


def penalized_gradient(params: np.ndarray, x: np.ndarray, y: np.ndarray, lam: float) -> np.ndarray:
    z = params[0] + x @ params[1:]
    resid = y - _sigmoid(z)
    grad = np.empty_like(params)
    grad[0] = resid.sum()
    grad[1:] = x.T @ resid - lam * params[1:]
    return grad


def fit_logistic(
    scores,
    labels,
    l2_lambda: float = 1e-3,
    max_iters: int = 100,
    tol: float = 1e-8,
) -> LrModel:
    """IRLS fit of the penalized logistic model.

    Newton steps are halved while they fail to improve the penalized
    likelihood; convergence means max |param change| < tol.  On
    non-convergence the best iterate is returned with the flag cleared.
    """
    x = np.asarray(scores, dtype=np.float64)
    if x.ndim == 1:
        x = x[:, None]
    y = np.asarray(labels, dtype=np.float64)
    if x.ndim != 2 or y.ndim != 1 or x.shape[0] != y.shape[0]:
        raise InvalidArgumentError("scores must be (n, m) with one label per row")
    if not (np.all(np.isfinite(x)) and np.all(np.isfinite(y))):
        raise InvalidArgumentError("scores and labels must be finite")
    if not np.all((y == 0) | (y == 1)):
        raise InvalidArgumentError("labels must be 0/1")
    if y.sum() == 0 or y.sum() == len(y):
        raise InvalidArgumentError("need at least one sample of each class")
    if l2_lambda < 0:
        raise InvalidArgumentError("l2_lambda must be >= 0")

    n, m = x.shape
    params = np.zeros(m + 1)
    penalty = np.full(m + 1, l2_lambda)
    penalty[0] = 0.0
    ll = penalized_log_likelihood(params, x, y, l2_lambda)
    converged = False
    iterations = 0
    for iterations in range(1, max_iters + 1):
        z = params[0] + x @ params[1:]
        p = _sigmoid(z)
        w = np.maximum(p * (1.0 - p), _PROB_FLOOR)
        design = np.concatenate([np.ones((n, 1)), x], axis=1)
        hessian = design.T @ (w[:, None] * design) + np.diag(penalty)
        grad = penalized_gradient(params, x, y, l2_lambda)
        try:
            step = np.linalg.solve(hessian, grad)
        except np.linalg.LinAlgError:
            break  # singular despite ridge: keep the best iterate
        # halve the step until the penalized likelihood stops decreasing
        scale = 1.0
        for _ in range(30):
            candidate = params + scale * step
            new_ll = penalized_log_likelihood(candidate, x, y, l2_lambda)
            if new_ll >= ll - 1e-12:
                break
            scale *= 0.5
        else:
            break
        moved = np.max(np.abs(candidate - params))
        params, ll = candidate, new_ll
        if moved < tol:
            converged = True
            break
    return LrModel(
        beta0=float(params[0]),
        beta=tuple(float(b) for b in params[1:]),
        l2_lambda=float(l2_lambda),
        converged=converged,
        iterations=iterations,
    )


def fuse(model: LrModel, scores) -> float:
    """Fused match probability sigmoid(b0 + b . s) in (0, 1)."""
    s = np.asarray(scores, dtype=np.float64).ravel()
    if s.shape != (len(model.beta),):
        raise InvalidArgumentError(
            f"expected {len(model.beta)} modality scores, got {s.shape[0]}"
        )
    z = model.beta0 + float(np.dot(np.asarray(model.beta), s))
    return float(_sigmoid(np.array([z]))[0])


def save_lr_model(model: LrModel, path) -> None:
    """JSON dump with full-precision floats (repr round-trips exactly)."""
    doc = {
        "schema": 1,
        "beta0": model.beta0,
        "beta": list(model.beta),
        "l2_lambda": model.l2_lambda,
        "converged": model.converged,
        "iterations": model.iterations,
    }
    try:
        Path(path).write_text(json.dumps(doc, sort_keys=True, indent=2) + "\n", encoding="utf-8")
    except OSError as exc:
        raise FileAccessError(f"{path}: cannot write fusion model") from exc


def load_lr_model(path) -> LrModel:
    try:
        doc = json.loads(Path(path).read_text(encoding="utf-8"))
    except OSError as exc:
        raise FileAccessError(f"{path}: cannot read fusion model") from exc
    except json.JSONDecodeError as exc:
        raise UnsupportedFormatError(f"{path}: fusion model is not valid JSON") from exc
    if doc.get("schema") != 1:
        raise UnsupportedFormatError(f"{path}: expected fusion model schema 1")
    return LrModel(
        beta0=float(doc["beta0"]),
        beta=tuple(float(b) for b in doc["beta"]),
        l2_lambda=float(doc["l2_lambda"]),
        converged=bool(doc["converged"]),
        iterations=int(doc["iterations"]),
    )

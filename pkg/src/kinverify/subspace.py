"""Third-order tensor algebra and the cross-view multilinear discriminant
projection with within-class covariance normalization.

Training alternates per-mode generalized eigenproblems that separate
cross-view extra-family differences from intra-family ones, then whitens
the projected space so within-family covariance becomes the identity.
Tensors are plain float64 ndarrays of shape (I1, I2, I3) with mode 3
indexing samples; unfoldings order columns with the lower remaining mode
varying fastest.
"""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import scipy.linalg

from .errors import (
    FileAccessError,
    InvalidArgumentError,
    NumericalError,
    UnsupportedFormatError,
)
from .rng import Rng

_KFM_MAGIC = b"KFM1"
_EXTRA_PAIR_CAP = 4  # extra-family pairs kept per intra-family pair


@dataclass(frozen=True)
class TxqdaParams:
    """Reduced dimensions, alternation count, and regularization strengths.

    ``out1``/``out2`` default (None) to min(I1, 200) and I2.  ``reg_eps``
    scales a trace-normalized ridge added to the intra scatter; ``wccn_eps``
    is the ridge inside the whitening inverse.  ``tol`` optionally stops the
    alternation early once successive subspaces agree to that angle.
    """

    out1: int | None = None
    out2: int | None = None
    iters: int = 5
    reg_eps: float = 1e-3
    wccn_eps: float = 1e-6
    seed: int = 0
    tol: float | None = None

    def __post_init__(self):
        if self.iters < 1:
            raise InvalidArgumentError("iters must be >= 1")
        if self.reg_eps < 0 or self.wccn_eps < 0:
            raise InvalidArgumentError("regularizers must be >= 0")

    def resolve(self, i1: int, i2: int) -> tuple[int, int]:
        out1 = min(i1, 200) if self.out1 is None else self.out1
        out2 = i2 if self.out2 is None else self.out2
        if not 1 <= out1 <= i1 or not 1 <= out2 <= i2:
            raise InvalidArgumentError(
                f"reduced dims ({out1}, {out2}) must lie in [1, {i1}] x [1, {i2}]"
            )
        return out1, out2


@dataclass(frozen=True)
class ProjectionModel:
    """Per-mode projection bases plus the whitening transform.

    ``u1`` is I1 x out1, ``u2`` is I2 x out2, and ``whiten`` is the
    lower-triangular (out1*out2)-square matrix applied after vectorization.
    """

    u1: np.ndarray
    u2: np.ndarray
    whiten: np.ndarray
    params: TxqdaParams = field(default_factory=TxqdaParams)

    @property
    def output_dim(self) -> int:
        return self.u1.shape[1] * self.u2.shape[1]


def _check_tensor(t: np.ndarray) -> np.ndarray:
    a = np.asarray(t, dtype=np.float64)
    if a.ndim != 3:
        raise InvalidArgumentError(f"expected a third-order tensor, got ndim {a.ndim}")
    return a


def unfold(t: np.ndarray, mode: int) -> np.ndarray:
    """Mode-k unfolding; columns ordered with lower remaining modes fastest."""
    a = _check_tensor(t)
    if mode not in (1, 2, 3):
        raise InvalidArgumentError(f"mode must be 1, 2 or 3, got {mode}")
    return np.moveaxis(a, mode - 1, 0).reshape((a.shape[mode - 1], -1), order="F")


def refold(m: np.ndarray, mode: int, shape: tuple[int, int, int]) -> np.ndarray:
    """Inverse of unfold for the given full tensor shape."""
    if mode not in (1, 2, 3):
        raise InvalidArgumentError(f"mode must be 1, 2 or 3, got {mode}")
    rest = [s for i, s in enumerate(shape) if i != mode - 1]
    a = np.asarray(m, dtype=np.float64).reshape((shape[mode - 1], *rest), order="F")
    return np.moveaxis(a, 0, mode - 1)


def mode_multiply(t: np.ndarray, m: np.ndarray, mode: int) -> np.ndarray:
    """Mode-k product: each mode-k fiber is mapped through the matrix m."""
    a = _check_tensor(t)
    mat = np.asarray(m, dtype=np.float64)
    if mode not in (1, 2):
        raise InvalidArgumentError("mode_multiply supports modes 1 and 2")
    if mat.ndim != 2 or mat.shape[1] != a.shape[mode - 1]:
        raise InvalidArgumentError(
            f"matrix {mat.shape} does not match tensor mode-{mode} size {a.shape[mode - 1]}"
        )
    moved = np.moveaxis(a, mode - 1, 0)
    out = np.tensordot(mat, moved, axes=(1, 0))
    return np.moveaxis(out, 0, mode - 1)


def generalized_eigh(
    a: np.ndarray, b: np.ndarray, top: int | None = None
) -> tuple[np.ndarray, np.ndarray]:
    """Symmetric-definite eigenpairs of a u = lambda b u, descending.

    With ``top`` set, only the that many largest eigenpairs are computed
    (worth it for the 3072/4096-dim feature modes).
    """
    n = a.shape[0]
    subset = None if top is None or top >= n else [n - top, n - 1]
    try:
        eigvals, eigvecs = scipy.linalg.eigh(a, b, subset_by_index=subset)
    except (np.linalg.LinAlgError, scipy.linalg.LinAlgError, ValueError) as exc:
        raise NumericalError(f"generalized eigenproblem failed: {exc}") from exc
    return eigvals[::-1], eigvecs[:, ::-1]


def train_wccn(vectors: np.ndarray, families, eps: float) -> np.ndarray:
    """Whitening transform of the within-family covariance.

    W averages per-family covariances (each family weighted equally); the
    returned B is lower triangular with positive diagonal and satisfies
    B W B^T = I when eps = 0 and W is nonsingular.
    """
    y = np.asarray(vectors, dtype=np.float64)
    if y.ndim != 2 or y.shape[0] == 0:
        raise InvalidArgumentError("vectors must be a nonempty (n, d) matrix")
    labels = list(families)
    if len(labels) != y.shape[0]:
        raise InvalidArgumentError("one family label per vector required")
    dim = y.shape[1]
    w = np.zeros((dim, dim))
    informative = 0
    fam_set = sorted(set(labels))
    for fam in fam_set:
        idx = [i for i, f in enumerate(labels) if f == fam]
        if len(idx) < 2:
            continue  # singleton families contribute a zero matrix
        centered = y[idx] - y[idx].mean(axis=0)
        w += centered.T @ centered / len(idx)
        informative += 1
    if informative == 0:
        raise NumericalError("no family has >= 2 vectors; within-class covariance degenerate")
    w /= len(fam_set)
    w_reg = w + eps * np.eye(dim)
    try:
        chol = scipy.linalg.cholesky(w_reg, lower=True)
    except scipy.linalg.LinAlgError as exc:
        raise NumericalError(
            "within-class covariance is singular; increase wccn_eps"
        ) from exc
    return scipy.linalg.solve_triangular(chol, np.eye(dim), lower=True)


def project(sample: np.ndarray, model: ProjectionModel) -> np.ndarray:
    """Whitened discriminant embedding: B vec(U1^T sample U2).

    vec stacks mode 1 fastest (column-major).
    """
    s = np.asarray(sample, dtype=np.float64)
    if s.shape != (model.u1.shape[0], model.u2.shape[0]):
        raise InvalidArgumentError(
            f"sample {s.shape} does not match model input "
            f"{(model.u1.shape[0], model.u2.shape[0])}"
        )
    reduced = model.u1.T @ s @ model.u2
    return model.whiten @ reduced.ravel(order="F")


def _difference_pairs(fams_x, fams_z, cap_ratio: int, rng: Rng):
    """Index pairs (i, j) split into same-family and capped cross-family."""
    intra = [
        (i, j)
        for i, fx in enumerate(fams_x)
        for j, fz in enumerate(fams_z)
        if fx == fz
    ]
    extra = [
        (i, j)
        for i, fx in enumerate(fams_x)
        for j, fz in enumerate(fams_z)
        if fx != fz
    ]
    cap = cap_ratio * len(intra)
    if len(extra) > cap:
        keep = rng.sample_indices(len(extra), cap)
        extra = [extra[i] for i in keep]
    return intra, extra


def _mode_scatter(diffs: np.ndarray, mode: int, u_other: np.ndarray) -> np.ndarray:
    """Average of G G^T over mode-k unfoldings of other-mode-projected slices."""
    if mode == 1:
        proj = np.einsum("abn,bk->akn", diffs, u_other)
        scatter = np.einsum("akn,ckn->ac", proj, proj)
    else:
        proj = np.einsum("abn,ak->kbn", diffs, u_other)
        scatter = np.einsum("kbn,kcn->bc", proj, proj)
    return scatter / diffs.shape[2]


def train_txqda(
    x: np.ndarray,
    z: np.ndarray,
    families_x,
    families_z,
    params: TxqdaParams = TxqdaParams(),
) -> ProjectionModel:
    """Alternating cross-view discriminant analysis followed by WCCN.

    Builds cross-view difference slices (x_i - z_j) for same-family and
    different-family index pairs (the latter subsampled to at most four per
    intra pair, seeded), then alternately solves per-mode generalized
    eigenproblems extra-vs-intra and keeps the top eigenvectors.  Finally
    projects both views and fits the within-family whitening transform.
    """
    x = _check_tensor(x)
    z = _check_tensor(z)
    fams_x = list(families_x)
    fams_z = list(families_z)
    if x.shape[:2] != z.shape[:2]:
        raise InvalidArgumentError(f"views disagree on slice dims: {x.shape} vs {z.shape}")
    if len(fams_x) != x.shape[2] or len(fams_z) != z.shape[2]:
        raise InvalidArgumentError("one family label per mode-3 slice required")
    fam_set = set(fams_x) | set(fams_z)
    if len(fam_set) < 2:
        raise InvalidArgumentError("need at least 2 families")
    for fam in fam_set:
        if fam not in fams_x or fam not in fams_z:
            raise InvalidArgumentError(f"family {fam!r} missing from one view")

    i1, i2 = x.shape[:2]
    out1, out2 = params.resolve(i1, i2)
    rng = Rng(params.seed)
    intra_idx, extra_idx = _difference_pairs(fams_x, fams_z, _EXTRA_PAIR_CAP, rng)

    def stack_diffs(pairs):
        ii = np.fromiter((p[0] for p in pairs), dtype=np.int64, count=len(pairs))
        jj = np.fromiter((p[1] for p in pairs), dtype=np.int64, count=len(pairs))
        return x[:, :, ii] - z[:, :, jj]

    d_intra = stack_diffs(intra_idx)
    d_extra = stack_diffs(extra_idx)

    u = {1: np.eye(i1)[:, :out1], 2: np.eye(i2)[:, :out2]}
    dims = {1: i1, 2: i2}
    for _ in range(params.iters):
        previous = {k: u[k] for k in u}
        for mode in (1, 2):
            other = 2 if mode == 1 else 1
            s_intra = _mode_scatter(d_intra, mode, u[other])
            s_extra = _mode_scatter(d_extra, mode, u[other])
            ridge = params.reg_eps * (np.trace(s_intra) / dims[mode])
            s_intra_reg = s_intra + ridge * np.eye(dims[mode])
            keep = out1 if mode == 1 else out2
            _, vecs = generalized_eigh(s_extra, s_intra_reg, top=keep)
            u[mode] = vecs[:, :keep]
        if params.tol is not None:
            angle = max(
                _max_subspace_angle(previous[1], u[1]),
                _max_subspace_angle(previous[2], u[2]),
            )
            if angle < params.tol:
                break

    y_all = np.concatenate(
        [
            _project_view(x, u[1], u[2]),
            _project_view(z, u[1], u[2]),
        ]
    )
    whiten = train_wccn(y_all, fams_x + fams_z, params.wccn_eps)
    return ProjectionModel(u1=u[1], u2=u[2], whiten=whiten, params=params)


def _project_view(t: np.ndarray, u1: np.ndarray, u2: np.ndarray) -> np.ndarray:
    """All mode-3 slices reduced and vectorized, one row per sample."""
    reduced = mode_multiply(mode_multiply(t, u1.T, 1), u2.T, 2)
    return unfold(reduced, 3)  # row n = vec(slice n), mode 1 fastest


def _max_subspace_angle(a: np.ndarray, b: np.ndarray) -> float:
    angles = scipy.linalg.subspace_angles(a, b)
    return float(angles.max()) if angles.size else 0.0


def save_model(model: ProjectionModel, path) -> None:
    """Serialize in the KFM1 container: dims, params JSON, then U1, U2 and
    the whitening matrix as little-endian float64, row-major."""
    i1, out1 = model.u1.shape
    i2, out2 = model.u2.shape
    params_doc = {
        "out1": model.params.out1,
        "out2": model.params.out2,
        "iters": model.params.iters,
        "reg_eps": model.params.reg_eps,
        "wccn_eps": model.params.wccn_eps,
        "seed": model.params.seed,
        "tol": model.params.tol,
    }
    params_blob = json.dumps(params_doc, sort_keys=True).encode("utf-8")
    chunks = [
        _KFM_MAGIC,
        struct.pack("<IIIII", 1, i1, out1, i2, out2),
        struct.pack("<I", len(params_blob)),
        params_blob,
        model.u1.astype("<f8").tobytes(order="C"),
        model.u2.astype("<f8").tobytes(order="C"),
        model.whiten.astype("<f8").tobytes(order="C"),
    ]
    try:
        Path(path).write_bytes(b"".join(chunks))
    except OSError as exc:
        raise FileAccessError(f"{path}: cannot write model") from exc


def load_model(path) -> ProjectionModel:
    """Read a KFM1 container written by save_model; round-trip exact."""
    try:
        buf = Path(path).read_bytes()
    except OSError as exc:
        raise FileAccessError(f"{path}: cannot read model") from exc
    if len(buf) < 4 or buf[:4] != _KFM_MAGIC:
        raise UnsupportedFormatError(f"{path}: not a KFM1 model file")
    offset = 4
    version, i1, out1, i2, out2 = struct.unpack_from("<IIIII", buf, offset)
    offset += 20
    if version != 1:
        raise UnsupportedFormatError(f"{path}: unsupported model version {version}")
    (params_len,) = struct.unpack_from("<I", buf, offset)
    offset += 4
    try:
        params_doc = json.loads(buf[offset : offset + params_len].decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise UnsupportedFormatError(f"{path}: corrupt params record") from exc
    offset += params_len
    dim = out1 * out2
    need = offset + 8 * (i1 * out1 + i2 * out2 + dim * dim)
    if len(buf) != need:
        raise UnsupportedFormatError(f"{path}: truncated model payload")
    u1 = np.frombuffer(buf, dtype="<f8", count=i1 * out1, offset=offset).reshape(i1, out1).copy()
    offset += 8 * i1 * out1
    u2 = np.frombuffer(buf, dtype="<f8", count=i2 * out2, offset=offset).reshape(i2, out2).copy()
    offset += 8 * i2 * out2
    whiten = np.frombuffer(buf, dtype="<f8", count=dim * dim, offset=offset).reshape(dim, dim).copy()
    params = TxqdaParams(
        out1=params_doc.get("out1"),
        out2=params_doc.get("out2"),
        iters=params_doc.get("iters", 5),
        reg_eps=params_doc.get("reg_eps", 1e-3),
        wccn_eps=params_doc.get("wccn_eps", 1e-6),
        seed=params_doc.get("seed", 0),
        tol=params_doc.get("tol"),
    )
    return ProjectionModel(u1=u1, u2=u2, whiten=whiten, params=params)

"""Local phase quantization codes and block histograms.

Each interior pixel gets an 8-bit code built from the signs of four local
short-term Fourier coefficients (real and imaginary parts), optionally
decorrelated under a first-order Markov image model before quantization.
Code maps are summarized as per-block 256-bin count histograms; the default
4x3 grid at 256 bins yields the 3072-long descriptor used throughout.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .errors import InvalidArgumentError


@dataclass(frozen=True)
class LpqParams:
    """Window size, STFT frequency, and decorrelation settings.

    ``freq`` defaults to 1/window, the classic choice; ``rho`` is the
    neighbor correlation of the image model used for decorrelation.
    """

    window: int = 3
    freq: float | None = None
    decorrelate: bool = True
    rho: float = 0.9

    def __post_init__(self):
        if self.window < 3:
            raise InvalidArgumentError("window must be >= 3")
        a = self.effective_freq
        if not 0 < a <= 0.5:
            raise InvalidArgumentError("frequency must be in (0, 0.5]")
        if not 0 < self.rho < 1:
            raise InvalidArgumentError("rho must be in (0, 1)")

    @property
    def effective_freq(self) -> float:
        return 1.0 / self.window if self.freq is None else self.freq


@dataclass(frozen=True)
class BlockGrid:
    """Histogram partition of the code map: rows x cols rectangles."""

    rows: int = 4
    cols: int = 3

    def __post_init__(self):
        if self.rows < 1 or self.cols < 1:
            raise InvalidArgumentError("grid must have at least one row and column")

    @property
    def blocks(self) -> int:
        return self.rows * self.cols


def window_offsets(window: int) -> np.ndarray:
    """Sample offsets along one axis: {-floor(R/2), ..., R-1-floor(R/2)}.

    Reduces to the centered window for odd R and stays well defined for
    even R (the anchor pixel sits at floor(R/2) inside the window).
    """
    lo = -(window // 2)
    return np.arange(lo, lo + window, dtype=np.float64)


def _frequency_pairs(a: float) -> list[tuple[float, float]]:
    # (u_x, u_y) with x along columns and y along rows
    return [(a, 0.0), (0.0, a), (a, a), (a, -a)]


@lru_cache(maxsize=64)
def _stft_filters(window: int, a: float) -> np.ndarray:
    """Complex window weights, shape (4, R, R), indexed [freq, dy, dx]."""
    offs = window_offsets(window)
    dx = offs[None, :]
    dy = offs[:, None]
    filters = [
        np.exp(-2j * np.pi * (ux * dx + uy * dy)) for ux, uy in _frequency_pairs(a)
    ]
    out = np.stack(filters)
    out.flags.writeable = False  # cached; callers must not mutate
    return out


@lru_cache(maxsize=64)
def decorrelation_transform(window: int, a: float, rho: float) -> np.ndarray:
    """8x8 orthogonal whitening rotation for the STFT sign vector.

    Window samples are modeled as unit-variance with covariance
    rho^(euclidean distance); the sign vector's model covariance
    D = M C M^T is diagonalized and the eigenbasis (descending eigenvalue,
    each column's largest-magnitude entry made positive) is applied before
    quantization.
    """
    offs = window_offsets(window)
    xx, yy = np.meshgrid(offs, offs)  # yy varies along rows like the filters
    pos = np.column_stack([xx.ravel(), yy.ravel()])
    dist = np.sqrt(((pos[:, None, :] - pos[None, :, :]) ** 2).sum(axis=2))
    cov = rho**dist
    filters = _stft_filters(window, a).reshape(4, -1)
    basis = np.vstack([filters.real, filters.imag])  # (8, R^2), matches g order
    d = basis @ cov @ basis.T
    eigvals, eigvecs = np.linalg.eigh(d)
    order = np.argsort(eigvals)[::-1]
    eigvecs = eigvecs[:, order]
    # deterministic sign: largest-|entry| of each eigenvector made positive
    picks = np.argmax(np.abs(eigvecs), axis=0)
    signs = np.sign(eigvecs[picks, np.arange(8)])
    signs[signs == 0] = 1.0
    out = (eigvecs * signs).T
    out.flags.writeable = False  # cached; callers must not mutate
    return out


def lpq_codes(gray: np.ndarray, params: LpqParams) -> np.ndarray:
    """8-bit LPQ code map of a single-channel image.

    Output shape is (h - R + 1, w - R + 1): only pixels with a full window
    are coded.  Bit j of a code is 1 iff component j of the (optionally
    decorrelated) coefficient vector [Re c1..c4, Im c1..c4] is strictly
    positive.

    Each window is referenced to its anchor pixel before the transform.
    The filters have zero DC, so this changes nothing in exact arithmetic,
    but it pins constant windows to exactly-zero coefficients (hence code 0)
    instead of leaving their signs to float round-off.
    """
    img = np.asarray(gray, dtype=np.float64)
    if img.ndim != 2:
        raise InvalidArgumentError("expected a single-channel 2-D image")
    r = params.window
    if img.shape[0] < r or img.shape[1] < r:
        raise InvalidArgumentError(
            f"image {img.shape} smaller than {r}x{r} window"
        )
    filters = _stft_filters(r, params.effective_freq)
    windows = sliding_window_view(img, (r, r))
    c = r // 2
    anchors = img[c : c + windows.shape[0], c : c + windows.shape[1]]
    windows = windows - anchors[:, :, None, None]
    coeffs = np.tensordot(windows, filters, axes=([2, 3], [1, 2]))  # (H', W', 4)
    g = np.concatenate([coeffs.real, coeffs.imag], axis=2)  # (H', W', 8)
    if params.decorrelate:
        v = decorrelation_transform(r, params.effective_freq, params.rho)
        g = g @ v.T
    bits = (g > 0).astype(np.uint8)
    weights = (1 << np.arange(8, dtype=np.uint32)).astype(np.uint32)
    return (bits * weights).sum(axis=2).astype(np.uint8)


def block_histograms(codes: np.ndarray, grid: BlockGrid = BlockGrid()) -> np.ndarray:
    """Concatenated 256-bin count histograms over a rows x cols partition.

    Blocks are near-equal rectangles; remainder pixels go to the last
    row/column of blocks.  Blocks are concatenated block-row-major, giving a
    vector of length rows * cols * 256.
    """
    c = np.asarray(codes)
    if c.ndim != 2:
        raise InvalidArgumentError("code map must be 2-D")
    h, w = c.shape
    if h < grid.rows or w < grid.cols:
        raise InvalidArgumentError(
            f"code map {c.shape} smaller than grid {grid.rows}x{grid.cols}"
        )
    row_edges = [i * (h // grid.rows) for i in range(grid.rows)] + [h]
    col_edges = [j * (w // grid.cols) for j in range(grid.cols)] + [w]
    hists = []
    for bi in range(grid.rows):
        for bj in range(grid.cols):
            block = c[row_edges[bi] : row_edges[bi + 1], col_edges[bj] : col_edges[bj + 1]]
            hists.append(np.bincount(block.ravel().astype(np.int64), minlength=256))
    return np.concatenate(hists).astype(np.int64)


def lpq_multiscale(
    gray: np.ndarray,
    scales,
    grid: BlockGrid = BlockGrid(),
    freq: float | None = None,
    decorrelate: bool = True,
    rho: float = 0.9,
    sample_id: str = "",
):
    """Per-window-size histogram columns stacked into one FeatureBlock.

    Column j holds the block-histogram vector for window size scales[j];
    the result is (rows*cols*256) x len(scales), the layout consumed by
    tensor assembly.
    """
    from .dataset import FeatureBlock

    scales = list(scales)
    if not scales:
        raise InvalidArgumentError("scales must be non-empty")
    cols = []
    for r in scales:
        params = LpqParams(window=int(r), freq=freq, decorrelate=decorrelate, rho=rho)
        cols.append(block_histograms(lpq_codes(gray, params), grid))
    return FeatureBlock(sample_id=sample_id, data=np.column_stack(cols))

"""Image I/O, color conversion, resizing, and multiscale retinex enhancement.

Pixel data is kept as float64 planes in [0, 255]; 8-bit sources are
promoted on load and only quantized back when writing PNG output.  All
operations are pure functions of their inputs and images are immutable
after construction, so per-image work can fan out to threads freely.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from PIL import Image as PilImage
from PIL import UnidentifiedImageError
from scipy.ndimage import correlate1d

from .errors import FileAccessError, InvalidArgumentError, UnsupportedFormatError

# BT.601 luma weights; conventional choice for luminance-based descriptors.
_LUMA_WEIGHTS = (0.299, 0.587, 0.114)


@dataclass(frozen=True, eq=False)
class Image:
    """Raster image as per-channel float64 planes.

    ``planes`` has shape (channels, height, width) with values in [0, 255].
    The array is marked read-only so instances can be shared across threads.
    """

    planes: np.ndarray

    def __post_init__(self):
        p = np.asarray(self.planes, dtype=np.float64)
        if p.ndim != 3 or p.shape[0] not in (1, 3):
            raise InvalidArgumentError(
                f"planes must be (channels, height, width) with 1 or 3 channels, got {p.shape}"
            )
        if p.shape[1] < 1 or p.shape[2] < 1:
            raise InvalidArgumentError("image dimensions must be >= 1")
        if not np.all(np.isfinite(p)):
            raise InvalidArgumentError("image values must be finite")
        p = np.ascontiguousarray(p)
        p.flags.writeable = False
        object.__setattr__(self, "planes", p)

    @property
    def channels(self) -> int:
        return self.planes.shape[0]

    @property
    def height(self) -> int:
        return self.planes.shape[1]

    @property
    def width(self) -> int:
        return self.planes.shape[2]

    @classmethod
    def from_array(cls, arr: np.ndarray) -> "Image":
        """Build from an (H, W), (H, W, 1) or (H, W, 3) array."""
        a = np.asarray(arr, dtype=np.float64)
        if a.ndim == 2:
            a = a[:, :, None]
        if a.ndim != 3:
            raise InvalidArgumentError(f"expected 2-D or 3-D array, got shape {arr.shape}")
        return cls(np.moveaxis(a, 2, 0))

    def to_array(self) -> np.ndarray:
        """(H, W, C) float64 copy."""
        return np.moveaxis(self.planes, 0, 2).copy()


@dataclass(frozen=True)
class MsrParams:
    """Multiscale retinex settings.

    scales holds the Gaussian surround standard deviations (pixels) and
    weights their mixing coefficients; weights are renormalized to sum to 1
    at construction.  epsilon_log is added before every logarithm, and
    normalize_percentiles gives the (low, high) percentile pair mapped to
    0/255 on output.
    """

    scales: tuple[float, ...] = (15.0, 80.0, 250.0)
    weights: tuple[float, ...] = (1.0, 1.0, 1.0)
    epsilon_log: float = 1.0
    normalize_percentiles: tuple[float, float] = (1.0, 99.0)

    def __post_init__(self):
        scales = tuple(float(s) for s in self.scales)
        weights = tuple(float(w) for w in self.weights)
        if len(scales) != len(weights) or not scales:
            raise InvalidArgumentError("scales and weights must be non-empty and equal length")
        if any(s <= 0 for s in scales):
            raise InvalidArgumentError("all scales must be positive")
        if any(w <= 0 for w in weights):
            raise InvalidArgumentError("all weights must be positive")
        if self.epsilon_log <= 0:
            raise InvalidArgumentError("epsilon_log must be positive")
        low, high = self.normalize_percentiles
        if not (0 <= low < high <= 100):
            raise InvalidArgumentError("percentiles must satisfy 0 <= low < high <= 100")
        total = sum(weights)
        object.__setattr__(self, "scales", scales)
        object.__setattr__(self, "weights", tuple(w / total for w in weights))
        object.__setattr__(self, "normalize_percentiles", (float(low), float(high)))


def load_image(path) -> Image:
    """Load a PNG or JPEG file as an RGB Image with values in [0, 255]."""
    try:
        with PilImage.open(path) as pil:
            if pil.format not in ("PNG", "JPEG"):
                raise UnsupportedFormatError(f"{path}: unsupported format {pil.format!r}")
            rgb = pil.convert("RGB")
            arr = np.asarray(rgb, dtype=np.float64)
    except UnidentifiedImageError as exc:
        raise UnsupportedFormatError(f"{path}: not a recognizable image file") from exc
    except (FileNotFoundError, PermissionError, IsADirectoryError) as exc:
        raise FileAccessError(f"{path}: cannot read image") from exc
    return Image.from_array(arr)


def save_image(img: Image, path) -> None:
    """Write an Image as 8-bit PNG (grayscale images are expanded to RGB)."""
    arr = img.to_array()
    if arr.shape[2] == 1:
        arr = np.repeat(arr, 3, axis=2)
    data = np.clip(np.rint(arr), 0, 255).astype(np.uint8)
    try:
        PilImage.fromarray(data, mode="RGB").save(path, format="PNG")
    except (FileNotFoundError, PermissionError, IsADirectoryError) as exc:
        raise FileAccessError(f"{path}: cannot write image") from exc


def to_grayscale(img: Image) -> Image:
    """BT.601 luma: gray = 0.299 R + 0.587 G + 0.114 B."""
    if img.channels != 3:
        raise InvalidArgumentError("to_grayscale expects a 3-channel image")
    r, g, b = img.planes
    gray = _LUMA_WEIGHTS[0] * r + _LUMA_WEIGHTS[1] * g + _LUMA_WEIGHTS[2] * b
    return Image(gray[None, :, :])


def resize_bilinear(img: Image, out_w: int, out_h: int) -> Image:
    """Bilinear resize with half-pixel centers and edge clamping.

    Source coordinate of output pixel i is (i + 0.5) * in/out - 0.5,
    clamped to the valid range, which makes same-size resizing exact.
    """
    if out_w < 1 or out_h < 1:
        raise InvalidArgumentError("output dimensions must be >= 1")
    if out_w == img.width and out_h == img.height:
        return img
    ys = _sample_coords(img.height, out_h)
    xs = _sample_coords(img.width, out_w)
    y0 = np.floor(ys).astype(np.int64)
    x0 = np.floor(xs).astype(np.int64)
    y1 = np.minimum(y0 + 1, img.height - 1)
    x1 = np.minimum(x0 + 1, img.width - 1)
    wy = (ys - y0)[:, None]
    wx = (xs - x0)[None, :]
    out = np.empty((img.channels, out_h, out_w), dtype=np.float64)
    for c, plane in enumerate(img.planes):
        top = plane[np.ix_(y0, x0)] * (1 - wx) + plane[np.ix_(y0, x1)] * wx
        bot = plane[np.ix_(y1, x0)] * (1 - wx) + plane[np.ix_(y1, x1)] * wx
        out[c] = top * (1 - wy) + bot * wy
    return Image(out)


def _sample_coords(in_size: int, out_size: int) -> np.ndarray:
    coords = (np.arange(out_size, dtype=np.float64) + 0.5) * (in_size / out_size) - 0.5
    return np.clip(coords, 0.0, in_size - 1)


def gaussian_kernel_1d(sigma: float) -> np.ndarray:
    """Normalized 1-D Gaussian with radius ceil(3*sigma)."""
    if sigma <= 0:
        raise InvalidArgumentError("sigma must be positive")
    radius = math.ceil(3.0 * sigma)
    x = np.arange(-radius, radius + 1, dtype=np.float64)
    k = np.exp(-(x * x) / (2.0 * sigma * sigma))
    return k / k.sum()


def gaussian_surround(plane: np.ndarray, sigma: float) -> np.ndarray:
    """Convolve a 2-D plane with a unit-sum 2-D Gaussian, radius ceil(3*sigma).

    Borders are handled by symmetric reflection (edge pixel included), so a
    constant plane is preserved exactly.  Computed separably; equals direct
    2-D convolution up to float64 summation order.
    """
    p = np.asarray(plane, dtype=np.float64)
    if p.ndim != 2:
        raise InvalidArgumentError("plane must be 2-D")
    kernel = gaussian_kernel_1d(sigma)
    radius = (len(kernel) - 1) // 2
    padded = np.pad(p, radius, mode="symmetric")
    out = correlate1d(padded, kernel, axis=0, mode="constant")
    out = correlate1d(out, kernel, axis=1, mode="constant")
    return out[radius:-radius, radius:-radius]


def msr_log_response(plane: np.ndarray, params: MsrParams) -> np.ndarray:
    """Weighted multiscale log-ratio of a plane to its Gaussian surrounds.

    R = sum_s w_s * (log(p + eps) - log(surround_s(p) + eps)), the retinex
    response before conversion back to the linear domain.  The surround is
    computed on the linear plane and logged afterwards, which keeps constant
    planes at exactly zero response.
    """
    p = np.asarray(plane, dtype=np.float64)
    log_plane = np.log(p + params.epsilon_log)
    response = np.zeros_like(p)
    for sigma, weight in zip(params.scales, params.weights):
        surround = gaussian_surround(p, sigma)
        response += weight * (log_plane - np.log(surround + params.epsilon_log))
    return response


def msr_enhance(img: Image, params: MsrParams | None = None) -> Image:
    """Multiscale retinex enhancement of an RGB image.

    Each channel is mapped to exp(R) of its multiscale log response, then
    linearly stretched so the configured low/high percentiles land on 0/255
    (clamped).  A channel whose percentile window is empty (e.g. a constant
    channel) maps to mid-gray 127.5.
    """
    if params is None:
        params = MsrParams()
    if img.channels != 3:
        raise InvalidArgumentError("msr_enhance expects a 3-channel image")
    low, high = params.normalize_percentiles
    out = np.empty_like(img.planes)
    for c, plane in enumerate(img.planes):
        linear = np.exp(msr_log_response(plane, params))
        lo, hi = np.percentile(linear, [low, high])
        if hi - lo <= 0:
            out[c].fill(127.5)
        else:
            out[c] = np.clip((linear - lo) / (hi - lo) * 255.0, 0.0, 255.0)
    return Image(out)

"""Face localization with an optional MTCNN backend.

The detector is reused from an installed implementation (facenet-pytorch
or the `mtcnn` package) when one is importable; it is never reimplemented
here.  Whenever no detector is available or no face is found, the tool
falls back to a center square crop and emits a warning.
"""

from __future__ import annotations

import warnings

import numpy as np
from PIL import Image

CROP_SIZE = 224
BOX_MARGIN = 0.10  # padding added around the detected box before squaring


def find_detector():
    """Best available MTCNN callable: image array -> (boxes, scores) or None."""
    try:
        from facenet_pytorch import MTCNN  # type: ignore

        net = MTCNN(keep_all=True)

        def detect(arr):
            boxes, probs = net.detect(Image.fromarray(arr))
            if boxes is None:
                return None
            return boxes, probs

        return detect
    except ImportError:
        pass
    try:
        from mtcnn import MTCNN  # type: ignore

        net = MTCNN()

        def detect(arr):
            found = net.detect_faces(arr)
            if not found:
                return None
            boxes = np.array(
                [[f["box"][0], f["box"][1], f["box"][0] + f["box"][2], f["box"][1] + f["box"][3]] for f in found]
            )
            probs = np.array([f["confidence"] for f in found])
            return boxes, probs

        return detect
    except ImportError:
        return None


def _square_box(box, width, height):
    x0, y0, x1, y1 = box
    cx, cy = (x0 + x1) / 2.0, (y0 + y1) / 2.0
    side = max(x1 - x0, y1 - y0) * (1.0 + 2.0 * BOX_MARGIN)
    half = side / 2.0
    x0, x1 = int(round(cx - half)), int(round(cx + half))
    y0, y1 = int(round(cy - half)), int(round(cy + half))
    return max(0, x0), max(0, y0), min(width, x1), min(height, y1)


def _center_square(width, height):
    side = min(width, height)
    x0 = (width - side) // 2
    y0 = (height - side) // 2
    return x0, y0, x0 + side, y0 + side


def detect_and_crop(path, detector=None) -> tuple[Image.Image, bool]:
    """Tightest detected face, squared with margin, resized to 224x224.

    Returns (crop, used_fallback).  The highest-confidence detection wins;
    with no detector or no detection the center square is used and a
    warning is issued.
    """
    with Image.open(path) as img:
        rgb = img.convert("RGB")
    arr = np.asarray(rgb)
    box = None
    if detector is not None:
        found = detector(arr)
        if found is not None:
            boxes, probs = found
            box = boxes[int(np.argmax(probs))]
    if box is None:
        warnings.warn(f"{path}: no face detected; using center crop", stacklevel=2)
        region = _center_square(rgb.width, rgb.height)
    else:
        region = _square_box(box, rgb.width, rgb.height)
    crop = rgb.crop(region)
    return crop.resize((CROP_SIZE, CROP_SIZE), Image.BILINEAR), box is None

"""VGG16 topology and fully-connected layer extraction.

The module layout (features.* / classifier.*) matches the common
torchvision state-dict naming, so published pretrained weights load
directly; tests drive the same graph with seeded random weights.
"""

from __future__ import annotations

from pathlib import Path

import numpy as np
import torch
from torch import nn

INPUT_SIZE = 224
LAYERS = ("fc6", "relu6", "fc7", "relu7")
FEATURE_DIM = 4096

# conv channel plan; "M" = 2x2 max-pool
_CFG = [64, 64, "M", 128, 128, "M", 256, 256, 256, "M", 512, 512, 512, "M", 512, 512, 512, "M"]

_NORM_MEAN = (0.485, 0.456, 0.406)
_NORM_STD = (0.229, 0.224, 0.225)


class Vgg16(nn.Module):
    def __init__(self):
        super().__init__()
        layers: list[nn.Module] = []
        channels = 3
        for item in _CFG:
            if item == "M":
                layers.append(nn.MaxPool2d(kernel_size=2, stride=2))
            else:
                layers.append(nn.Conv2d(channels, item, kernel_size=3, padding=1))
                layers.append(nn.ReLU(inplace=True))
                channels = item
        self.features = nn.Sequential(*layers)
        self.avgpool = nn.AdaptiveAvgPool2d((7, 7))
        self.classifier = nn.Sequential(
            nn.Linear(512 * 7 * 7, FEATURE_DIM),
            nn.ReLU(inplace=True),
            nn.Dropout(),
            nn.Linear(FEATURE_DIM, FEATURE_DIM),
            nn.ReLU(inplace=True),
            nn.Dropout(),
            nn.Linear(FEATURE_DIM, 1000),
        )


def load_network(weights_path) -> Vgg16:
    """Instantiate VGG16 and load a state dict (f16/f32/f64 accepted)."""
    path = Path(weights_path)
    if not path.exists():
        raise FileNotFoundError(f"{path}: weights file missing")
    state = torch.load(path, map_location="cpu", weights_only=True)
    state = {k: v.to(torch.float32) for k, v in state.items()}
    model = Vgg16()
    model.load_state_dict(state)
    model.eval()
    return model


def preprocess(image) -> torch.Tensor:
    """PIL RGB image (224x224) to a normalized 1x3x224x224 tensor."""
    arr = np.asarray(image, dtype=np.float32) / 255.0
    if arr.shape != (INPUT_SIZE, INPUT_SIZE, 3):
        raise ValueError(f"expected {INPUT_SIZE}x{INPUT_SIZE}x3 input, got {arr.shape}")
    arr = (arr - np.array(_NORM_MEAN, dtype=np.float32)) / np.array(_NORM_STD, dtype=np.float32)
    return torch.from_numpy(arr.transpose(2, 0, 1))[None, :]


def extract_layers(model: Vgg16, image) -> np.ndarray:
    """fc6/relu6/fc7/relu7 activations as a 4096 x 4 float32 matrix.

    Inference runs in eval mode (dropout disabled) with gradients off, so
    identical inputs give identical columns.
    """
    x = preprocess(image)
    with torch.no_grad():
        feats = model.avgpool(model.features(x)).flatten(1)
        fc6 = model.classifier[0](feats)
        relu6 = torch.relu(fc6)
        fc7 = model.classifier[3](relu6)
        relu7 = torch.relu(fc7)
    columns = [t[0].numpy().astype(np.float32) for t in (fc6, relu6, fc7, relu7)]
    return np.stack(columns, axis=1)

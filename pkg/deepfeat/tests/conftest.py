import numpy as np
import pytest
import torch
from PIL import Image

from deepfeat.vgg import Vgg16


@pytest.fixture(scope="session")
def weights_file(tmp_path_factory):
    """Seeded random VGG16 weights; f16 on disk to halve the footprint."""
    torch.manual_seed(1234)
    model = Vgg16()
    state = {k: v.to(torch.float16) for k, v in model.state_dict().items()}
    path = tmp_path_factory.mktemp("weights") / "vgg16_random.pt"
    torch.save(state, path)
    return path


@pytest.fixture()
def face_image(tmp_path):
    """Synthetic photo-like image: smooth gradient plus a bright blob."""
    h, w = 160, 120
    y, x = np.mgrid[0:h, 0:w].astype(np.float64)
    r = np.hypot(x - w / 2, y - h / 2)
    arr = np.stack(
        [
            80 + x / w * 120,
            60 + y / h * 140,
            np.clip(255 - 2.2 * r, 0, 255),
        ],
        axis=2,
    ).astype(np.uint8)
    path = tmp_path / "face.png"
    Image.fromarray(arr).save(path)
    return path

"""Cross-component golden test: a checked-in KFV1 container produced by the
deep-feature extraction tool must parse through this package's reader with
exact values, the documented 4096x4 geometry, and rectifier-consistent
columns."""

from pathlib import Path

import numpy as np

from kinverify.dataset import read_feature_file

FIXTURES = Path(__file__).parent / "fixtures"


class TestGoldenDeepFeatures:
    def test_golden_container_parses_exactly(self):
        blocks = read_feature_file(FIXTURES / "golden_vgg.kfv")
        expected = np.load(FIXTURES / "golden_vgg_expected.npz")
        assert [b.sample_id for b in blocks] == list(expected["ids"])
        for n, block in enumerate(blocks):
            assert np.array_equal(block.data, expected[f"block{n}"])

    def test_golden_blocks_are_4096_by_4(self):
        for block in read_feature_file(FIXTURES / "golden_vgg.kfv"):
            assert block.data.shape == (4096, 4)
            assert block.data.dtype == np.float32

    def test_relu_columns_match_rectified_fc(self):
        for block in read_feature_file(FIXTURES / "golden_vgg.kfv"):
            fc6, relu6, fc7, relu7 = block.data.T
            assert np.allclose(relu6, np.maximum(fc6, 0.0), atol=1e-5)
            assert np.allclose(relu7, np.maximum(fc7, 0.0), atol=1e-5)

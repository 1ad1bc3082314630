"""LPQ descriptor tests against a direct per-pixel DFT oracle, plus block
histogram counting identities."""

import numpy as np
import pytest

from kinverify.errors import InvalidArgumentError
from kinverify.lpq import (
    BlockGrid,
    LpqParams,
    block_histograms,
    decorrelation_transform,
    lpq_codes,
    lpq_multiscale,
    window_offsets,
)


def oracle_lpq_codes(img, window, freq=None):
    """Brute-force reference: explicit DFT over every full window.

    Kept deliberately naive (per-pixel window sums, no decorrelation) so it
    shares nothing with the sliding-window fast path.  Implements the same
    descriptor definition: windows are referenced to their anchor pixel.
    """
    img = np.asarray(img, dtype=np.float64)
    a = 1.0 / window if freq is None else freq
    offs = window_offsets(window)
    dx = offs[None, :]
    dy = offs[:, None]
    tables = [
        np.exp(-2j * np.pi * (ux * dx + uy * dy))
        for ux, uy in [(a, 0.0), (0.0, a), (a, a), (a, -a)]
    ]
    h, w = img.shape
    anchor = window // 2
    out = np.zeros((h - window + 1, w - window + 1), dtype=np.uint8)
    for i in range(out.shape[0]):
        for j in range(out.shape[1]):
            patch = img[i : i + window, j : j + window]
            patch = patch - patch[anchor, anchor]
            coeffs = [np.sum(patch * t) for t in tables]
            g = [c.real for c in coeffs] + [c.imag for c in coeffs]
            code = 0
            for bit, val in enumerate(g):
                if val > 0:
                    code |= 1 << bit
            out[i, j] = code
    return out


class TestLpqCodes:
    @pytest.mark.parametrize("decorrelate", [False, True])
    def test_constant_image_all_zero(self, decorrelate):
        img = np.full((10, 10), 77.0)
        codes = lpq_codes(img, LpqParams(window=3, decorrelate=decorrelate))
        assert codes.shape == (8, 8)
        assert np.all(codes == 0)

    def test_matches_dft_oracle_small(self):
        rng = np.random.default_rng(5)
        img = rng.uniform(0, 255, size=(9, 9))
        codes = lpq_codes(img, LpqParams(window=3, decorrelate=False))
        assert np.array_equal(codes, oracle_lpq_codes(img, 3))

    @pytest.mark.parametrize("window", [3, 4, 5, 6, 7, 8, 9])
    def test_matches_dft_oracle_all_windows(self, window):
        rng = np.random.default_rng(100 + window)
        img = rng.uniform(0, 255, size=(16, 16))
        codes = lpq_codes(img, LpqParams(window=window, decorrelate=False))
        assert np.array_equal(codes, oracle_lpq_codes(img, window))

    def test_horizontal_ramp_constant_along_rows(self):
        # A ramp is shift-covariant, so every window sees the same content
        # and the code map is constant along rows; the oracle confirms the
        # same statistic on its own arithmetic path.
        img = np.tile(np.arange(12, dtype=np.float64) * 7.0, (12, 1))
        codes = lpq_codes(img, LpqParams(window=3, decorrelate=False))
        assert np.all(codes == codes[:, :1])
        oracle = oracle_lpq_codes(img, 3)
        assert np.all(oracle == oracle[:, :1])

    def test_output_shape(self):
        img = np.zeros((20, 14))
        codes = lpq_codes(img, LpqParams(window=5, decorrelate=False))
        assert codes.shape == (16, 10)

    def test_dc_shift_invariance(self):
        rng = np.random.default_rng(8)
        img = rng.uniform(0, 200, size=(11, 13))
        for params in (LpqParams(window=4, decorrelate=False), LpqParams(window=4)):
            assert np.array_equal(lpq_codes(img, params), lpq_codes(img + 31.0, params))

    def test_positive_scale_invariance(self):
        rng = np.random.default_rng(9)
        img = rng.uniform(0, 255, size=(10, 10))
        params = LpqParams(window=3, decorrelate=False)
        assert np.array_equal(lpq_codes(img, params), lpq_codes(img * 4.5, params))

    def test_image_smaller_than_window(self):
        with pytest.raises(InvalidArgumentError):
            lpq_codes(np.zeros((4, 9)), LpqParams(window=5))

    def test_decorrelation_transform_is_orthogonal(self):
        v = decorrelation_transform(5, 0.2, 0.9)
        assert np.allclose(v @ v.T, np.eye(8), atol=1e-10)

    def test_params_validation(self):
        with pytest.raises(InvalidArgumentError):
            LpqParams(window=2)
        with pytest.raises(InvalidArgumentError):
            LpqParams(window=3, freq=0.7)
        with pytest.raises(InvalidArgumentError):
            LpqParams(window=3, rho=1.0)


class TestBlockHistograms:
    def test_constant_map_lands_in_bin_zero(self):
        codes = np.zeros((40, 30), dtype=np.uint8)
        hist = block_histograms(codes, BlockGrid(4, 3))
        assert hist.shape == (3072,)
        per_block = hist.reshape(12, 256)
        assert np.all(per_block[:, 0] == 100)  # 10 x 10 pixels per block
        assert np.all(per_block[:, 1:] == 0)

    def test_mass_conservation(self):
        rng = np.random.default_rng(21)
        codes = rng.integers(0, 256, size=(25, 17)).astype(np.uint8)
        hist = block_histograms(codes, BlockGrid(4, 3))
        assert hist.sum() == 25 * 17

    def test_uniform_random_24x24_blocks_of_48(self):
        rng = np.random.default_rng(33)
        codes = rng.integers(0, 256, size=(24, 24)).astype(np.uint8)
        hist = block_histograms(codes, BlockGrid(4, 3))
        sums = hist.reshape(12, 256).sum(axis=1)
        assert np.all(sums == 48)
        # independent scalar counting loop over the same partition
        expected = np.zeros(12 * 256, dtype=np.int64)
        for y in range(24):
            for x in range(24):
                block = (y // 6) * 3 + (x // 8)
                expected[block * 256 + int(codes[y, x])] += 1
        assert np.array_equal(hist, expected)

    def test_remainder_goes_to_last_blocks(self):
        codes = np.zeros((10, 7), dtype=np.uint8)
        hist = block_histograms(codes, BlockGrid(4, 3))
        counts = hist.reshape(12, 256)[:, 0].reshape(4, 3)
        # rows of height 2,2,2,4; cols of width 2,2,3
        assert np.array_equal(counts, np.outer([2, 2, 2, 4], [2, 2, 3]))

    def test_grid_larger_than_map(self):
        with pytest.raises(InvalidArgumentError):
            block_histograms(np.zeros((2, 5), dtype=np.uint8), BlockGrid(4, 3))


class TestMultiscale:
    def test_seven_scales_gives_3072_by_7(self):
        rng = np.random.default_rng(1)
        img = rng.uniform(0, 255, size=(128, 128))
        block = lpq_multiscale(img, range(3, 10))
        assert block.data.shape == (3072, 7)

    def test_single_scale(self):
        rng = np.random.default_rng(2)
        img = rng.uniform(0, 255, size=(32, 32))
        block = lpq_multiscale(img, [3])
        assert block.data.shape == (3072, 1)

    def test_repeated_scale_gives_identical_columns(self):
        rng = np.random.default_rng(3)
        img = rng.uniform(0, 255, size=(32, 32))
        block = lpq_multiscale(img, [5, 5])
        assert np.array_equal(block.data[:, 0], block.data[:, 1])

    def test_empty_scales_rejected(self):
        with pytest.raises(InvalidArgumentError):
            lpq_multiscale(np.zeros((16, 16)), [])

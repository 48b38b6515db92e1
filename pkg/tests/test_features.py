import numpy as np
import pytest

from biasbench.core import AccumulatedFrame
from biasbench.tuner.features import (
    FeatureConfig,
    TileFeatureExtractor,
    extract_features,
    normalize_frame,
    register_extractor,
)


def frame_from(on, off=None):
    on = np.asarray(on, dtype=np.uint32)
    off = np.zeros_like(on) if off is None else np.asarray(off, dtype=np.uint32)
    return AccumulatedFrame(on.shape[1], on.shape[0], 0, 8000, on, off)


class TestNormalizeFrame:
    def test_all_zero_maps_to_zero(self):
        norm = normalize_frame(frame_from(np.zeros((8, 8))))
        assert norm.shape == (2, 8, 8)
        assert not norm.any()

    def test_piecewise_anchor_values(self):
        # 100 pixels, nearest-rank 90th percentile 10, max 110
        vals = np.concatenate([np.full(89, 5), [10], np.full(9, 60), [110]])
        on = vals.reshape(10, 10)
        norm = normalize_frame(frame_from(on))[0]
        flat = dict(zip(vals.tolist(), norm.ravel().tolist()))
        assert flat[10] == pytest.approx(0.9)
        assert flat[60] == pytest.approx(0.95)
        assert flat[110] == pytest.approx(1.0)
        assert flat[5] == pytest.approx(0.45)

    def test_hot_pixel_capped_not_dominant(self):
        on = np.full((20, 20), 4, dtype=np.uint32)
        on[3, 3] = 4000  # 1000x the median
        norm = normalize_frame(frame_from(on))[0]
        assert norm[3, 3] == pytest.approx(1.0)
        assert norm[0, 0] == pytest.approx(0.9)  # the 90th percentile value

    def test_degenerate_q_zero_tail_branch(self):
        on = np.zeros((10, 10), dtype=np.uint32)
        on[0, 0] = 7  # >90% of pixels are zero, so q == 0
        norm = normalize_frame(frame_from(on))[0]
        assert norm[0, 0] == pytest.approx(1.0)
        assert norm[5, 5] == 0.0

    def test_constant_frame_first_branch_only(self):
        norm = normalize_frame(frame_from(np.full((6, 6), 9)))[0]
        assert np.allclose(norm, 0.9)

    def test_output_in_unit_interval_and_order_preserving(self):
        rng = np.random.default_rng(5)
        on = rng.integers(0, 50, size=(16, 16))
        norm = normalize_frame(frame_from(on))[0]
        assert norm.min() >= 0.0 and norm.max() <= 1.0
        a, b = on.ravel(), norm.ravel()
        for i in range(0, 256, 7):
            for j in range(0, 256, 11):
                if a[i] < a[j]:
                    assert b[i] <= b[j] + 1e-12

    def test_channels_normalized_independently(self):
        on = np.full((4, 4), 10, dtype=np.uint32)
        off = np.zeros((4, 4), dtype=np.uint32)
        norm = normalize_frame(frame_from(on, off))
        assert np.allclose(norm[0], 0.9)
        assert not norm[1].any()


class TestExtractFeatures:
    def test_zero_frame_gives_zero_vector(self):
        fv = extract_features(frame_from(np.zeros((64, 64))))
        assert fv.values.shape == (224,)
        assert not fv.values.any()

    def test_default_dimension_is_tiles_x14(self):
        fv = extract_features(frame_from(np.ones((64, 64))))
        assert len(fv.values) == 4 * 4 * 2 * 7 == 224

    def test_full_tile_shift_permutes_blocks(self):
        rng = np.random.default_rng(9)
        on = np.zeros((64, 64), dtype=np.uint32)
        on[4:12, 4:12] = rng.integers(1, 9, size=(8, 8))
        shifted = np.zeros_like(on)
        shifted[:, 16:] = on[:, :48]  # shift right by one 16 px tile
        f0 = extract_features(frame_from(on)).values.reshape(4, 4, 14)
        f1 = extract_features(frame_from(shifted)).values.reshape(4, 4, 14)
        assert np.allclose(f1[0, 1], f0[0, 0])
        assert np.allclose(f1[:, 1:], f0[:, :3])

    def test_non_divisible_frame_padded(self):
        fv = extract_features(frame_from(np.ones((10, 10))))
        assert len(fv.values) == 224

    def test_unknown_extractor_rejected(self):
        with pytest.raises(ValueError, match="extractor"):
            extract_features(frame_from(np.ones((8, 8))), FeatureConfig(extractor="resnet999"))

    def test_registered_extractor_used(self):
        register_extractor("sum-only", lambda tile: [float(tile.sum())], 1)
        fv = extract_features(frame_from(np.ones((8, 8))), FeatureConfig(tile_grid=(2, 2), extractor="sum-only"))
        assert len(fv.values) == 2 * 2 * 2 * 1

    def test_nonfinite_values_rejected(self):
        from biasbench.tuner.features import FeatureVector

        with pytest.raises(ValueError, match="finite"):
            FeatureVector(np.array([1.0, np.nan]), (4, 4), "pooled-stats", 8000)


class TestTileFeatureExtractor:
    def test_transform_batch_shape(self):
        ex = TileFeatureExtractor()
        frames = [frame_from(np.ones((64, 64))) for _ in range(3)]
        assert ex.transform(frames).shape == (3, 224)
        assert ex.dim == 224

    def test_params_roundtrip(self):
        ex = TileFeatureExtractor(tile_grid=(2, 2), window_us=1000)
        params = ex.get_params()
        ex2 = TileFeatureExtractor().set_params(**params)
        assert ex2.get_params() == params

    def test_unknown_param_rejected(self):
        with pytest.raises(ValueError):
            TileFeatureExtractor().set_params(bogus=1)

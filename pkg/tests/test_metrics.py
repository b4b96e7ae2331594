"""Evaluation metrics: IoU aggregates, smoothness, saliency agreement."""

import math

import numpy as np
import pytest

from cropflow import (
    CropBox,
    DenseTrack,
    DimsMismatch,
    FrameDims,
    InsufficientData,
    LccUndefined,
    SaliencyMap,
    SimUndefined,
    evaluate_dataset,
)
from cropflow.metrics import (
    best_of_three,
    box_to_binary_map,
    center_crop,
    iou_at_r,
    lcc,
    m_iou,
    mae,
    mse,
    percentile_binarize,
    preserve_height,
    sim,
    temporal_smoothness,
    video_iou,
)

HD = FrameDims(1920, 1080)


def track(centers, r=0.5, dims=HD):
    return DenseTrack(tuple(CropBox(cx, cy, r) for cx, cy in centers), dims)


def shifted_pair(iou_target: float, frames: int = 2):
    """Two constant tracks of equal-size boxes with a chosen frame-wise IoU."""
    w = 0.5 * 1080 * 0.5625  # realized width at r=0.5
    dx = w * (1.0 - iou_target) / (1.0 + iou_target)
    return (
        track([(900.0, 540.0)] * frames),
        track([(900.0 + dx, 540.0)] * frames),
    )


class TestVideoIou:
    def test_identity_is_one(self):
        t = track([(800.0, 500.0), (900.0, 600.0)])
        assert video_iou(t, t) == 1.0

    def test_engineered_value(self):
        pred, gt = shifted_pair(0.6)
        assert video_iou(pred, gt) == pytest.approx(0.6, abs=1e-12)

    def test_length_mismatch(self):
        a = track([(800.0, 500.0)])
        b = track([(800.0, 500.0), (900.0, 600.0)])
        with pytest.raises(DimsMismatch):
            video_iou(a, b)

    def test_dims_mismatch(self):
        a = track([(800.0, 500.0)])
        b = track([(300.0, 300.0)], dims=FrameDims(1280, 720))
        with pytest.raises(DimsMismatch):
            video_iou(a, b)


class TestAggregates:
    def test_m_iou_identity_is_100(self):
        t = track([(800.0, 500.0), (900.0, 600.0)])
        assert m_iou([t], [t]) == 100.0

    def test_m_iou_mean_over_videos(self):
        p4, g4 = shifted_pair(0.4)
        p6, g6 = shifted_pair(0.6)
        assert m_iou([p4, p6], [g4, g6]) == pytest.approx(50.0, abs=1e-9)

    def test_iou_at_threshold_is_strict(self):
        assert iou_at_r([0.4, 0.6], 0.5) == 50.0
        assert iou_at_r([0.4, 0.6], 0.4) == 50.0
        assert iou_at_r([0.4, 0.6], 0.39) == 100.0
        assert iou_at_r([0.4, 0.6], 0.6) == 0.0

    def test_iou_at_empty(self):
        with pytest.raises(InsufficientData):
            iou_at_r([], 0.5)


class TestTemporalSmoothness:
    def test_constant_track_is_100(self):
        t = track([(800.0, 500.0)] * 5)
        assert temporal_smoothness(t) == 100.0

    def test_known_value(self):
        # cx moves 192 px per frame at width 1920: mean |d cx|/W = 0.1,
        # averaged over three components gives 1/30.
        t = track([(800.0, 500.0), (992.0, 500.0)])
        assert temporal_smoothness(t) == pytest.approx(100.0 * (1.0 - 0.1 / 3.0), abs=1e-9)

    def test_needs_two_frames(self):
        with pytest.raises(InsufficientData):
            temporal_smoothness(track([(800.0, 500.0)]))

    def test_jittery_below_smooth(self):
        smooth = track([(800.0 + i, 500.0) for i in range(10)])
        jitter = track([(800.0 + 50 * (i % 2), 500.0) for i in range(10)])
        assert temporal_smoothness(jitter) < temporal_smoothness(smooth)


class TestBinaryMap:
    def test_full_height_band_geometry(self):
        m = box_to_binary_map(CropBox(960.0, 540.0, 1.0), HD)
        vals = m.values
        assert vals.shape == (1080, 1920)
        cols = vals.sum(axis=0)
        assert float(vals.sum()) == 608 * 1080
        on = np.nonzero(cols)[0]
        assert on[0] == 656 and on[-1] == 1263

    def test_pixel_center_rule(self):
        # Rect [0, 303.75] x [0, 540]: pixel centers 0.5 .. 303.5 are in.
        m = box_to_binary_map(CropBox(0.0, 0.0, 0.5), HD)
        row = m.values[0]
        assert row[:304].all() and not row[304:].any()
        col = m.values[:, 0]
        assert col[:540].all() and not col[540:].any()


class TestSaliencyMeasures:
    def rand_map(self, seed, shape=(20, 30)):
        rng = np.random.default_rng(seed)
        return SaliencyMap(rng.uniform(0.0, 1.0, shape))

    def test_lcc_identity(self):
        m = self.rand_map(1)
        assert lcc(m, m) == pytest.approx(1.0, abs=1e-12)

    def test_lcc_anticorrelation(self):
        m = self.rand_map(2)
        inv = SaliencyMap(m.values.max() - m.values)
        assert lcc(m, inv) == pytest.approx(-1.0, abs=1e-12)

    def test_lcc_constant_undefined(self):
        m = self.rand_map(3)
        flat = SaliencyMap(np.full((20, 30), 0.5))
        with pytest.raises(LccUndefined):
            lcc(m, flat)

    def test_sim_identity(self):
        m = self.rand_map(4)
        assert sim(m, m) == pytest.approx(1.0, abs=1e-12)

    def test_sim_range_and_symmetry(self):
        a, b = self.rand_map(5), self.rand_map(6)
        v = sim(a, b)
        assert 0.0 < v < 1.0
        assert sim(b, a) == pytest.approx(v, abs=1e-12)

    def test_sim_zero_mass_undefined(self):
        z = SaliencyMap(np.zeros((20, 30)))
        with pytest.raises(SimUndefined):
            sim(self.rand_map(7), z)

    def test_mae_mse_identity_zero(self):
        m = self.rand_map(8)
        assert mae(m, m) == 0.0
        assert mse(m, m) == 0.0

    def test_mae_mse_known_values(self):
        a = SaliencyMap(np.array([[1.0, 0.0], [0.0, 0.0]]))
        b = SaliencyMap(np.array([[1.0, 1.0], [0.0, 0.0]]))
        assert mae(a, b) == pytest.approx(0.25, abs=1e-12)
        assert mse(a, b) == pytest.approx(0.25, abs=1e-12)

    def test_peak_normalization(self):
        a = SaliencyMap(np.array([[2.0, 0.0], [0.0, 0.0]]))
        b = SaliencyMap(np.array([[8.0, 0.0], [0.0, 0.0]]))
        assert mae(a, b) == 0.0

    def test_shape_mismatch(self):
        with pytest.raises(DimsMismatch):
            lcc(self.rand_map(9, (10, 10)), self.rand_map(9, (10, 11)))


class TestPercentileBinarize:
    def test_one_to_hundred_at_90(self):
        m = SaliencyMap(np.arange(1.0, 101.0).reshape(10, 10))
        out = percentile_binarize(m, 90.0)
        assert float(out.values.sum()) == 10.0
        assert out.values.ravel()[90:].all()

    def test_constant_map_all_zero(self):
        m = SaliencyMap(np.full((5, 5), 3.0))
        assert percentile_binarize(m, 90.0).values.sum() == 0.0

    def test_range_validation(self):
        m = SaliencyMap(np.ones((5, 5)))
        for pct in (0.0, 100.0, -5.0, 120.0):
            with pytest.raises(ValueError):
                percentile_binarize(m, pct)


class TestDerivedBoxes:
    def test_center_crop(self):
        box = center_crop(HD)
        assert (box.cx, box.cy, box.r) == (960.0, 540.0, 1.0)

    def test_preserve_height_keeps_interior_center(self):
        out = preserve_height(CropBox(700.0, 200.0, 0.3), HD)
        assert (out.cx, out.cy, out.r) == (700.0, 540.0, 1.0)

    def test_preserve_height_clamps_to_frame(self):
        out = preserve_height(CropBox(100.0, 10.0, 0.2), HD)
        assert (out.cx, out.cy, out.r) == (303.75, 540.0, 1.0)
        out = preserve_height(CropBox(1900.0, 10.0, 0.2), HD)
        assert out.cx == 1920.0 - 303.75

    def test_preserve_height_impossible_frame(self):
        with pytest.raises(DimsMismatch):
            preserve_height(CropBox(8.0, 50.0, 0.5), FrameDims(16, 100))


class TestEvaluateDataset:
    def test_self_evaluation(self):
        t = track([(800.0, 500.0), (820.0, 520.0)])
        report = evaluate_dataset({"v": t}, {"v": t}, thresholds=(0.3, 0.5))
        assert report.m_iou == 100.0
        assert report.iou_at == {0.3: 100.0, 0.5: 100.0}
        assert report.per_video["v"]["iou"] == 1.0
        assert report.saliency is None
        assert report.seconds_per_video is None

    def test_mixed_videos(self):
        p4, g4 = shifted_pair(0.4)
        p6, g6 = shifted_pair(0.6)
        report = evaluate_dataset({"a": p4, "b": p6}, {"a": g4, "b": g6}, thresholds=(0.5,))
        assert report.m_iou == pytest.approx(50.0, abs=1e-9)
        assert report.iou_at[0.5] == 50.0

    def test_missing_prediction(self):
        t = track([(800.0, 500.0), (820.0, 520.0)])
        with pytest.raises(DimsMismatch):
            evaluate_dataset({}, {"v": t})

    def test_empty(self):
        with pytest.raises(InsufficientData):
            evaluate_dataset({}, {})

    def test_extra_predictions_ignored(self):
        t = track([(800.0, 500.0), (820.0, 520.0)])
        report = evaluate_dataset({"v": t, "extra": t}, {"v": t})
        assert set(report.per_video) == {"v"}

    def test_timing_measured(self):
        t = track([(800.0, 500.0), (820.0, 520.0)])
        report = evaluate_dataset({"v": t}, {"v": t}, timing=True)
        assert report.seconds_per_video is not None
        assert report.seconds_per_video >= 0.0

    def test_saliency_agreement(self):
        boxes = [(800.0, 500.0), (820.0, 520.0)]
        t = track(boxes)
        ref = box_to_binary_map(CropBox(800.0, 500.0, 0.5), HD)
        report = evaluate_dataset(
            {"v": t}, {"v": t}, saliency_by_video={"v": {0: ref}}
        )
        assert report.saliency is not None
        assert report.saliency["lcc"] == pytest.approx(1.0, abs=1e-9)
        assert report.saliency["sim"] == pytest.approx(1.0, abs=1e-9)
        assert report.saliency["mae"] == pytest.approx(0.0, abs=1e-12)

    def test_saliency_undefined_pairs_skipped(self):
        t = track([(800.0, 500.0), (820.0, 520.0)])
        flat = SaliencyMap(np.zeros((1080, 1920)))
        report = evaluate_dataset({"v": t}, {"v": t}, saliency_by_video={"v": {0: flat}})
        # Every measure is undefined against an all-zero reference map.
        assert report.saliency is None


class TestBestOfThree:
    def test_returns_result_and_time(self):
        calls = []
        result, secs = best_of_three(lambda: calls.append(1) or 42)
        assert result == 42
        assert len(calls) == 3
        assert secs >= 0.0


class TestSaliencyMapValidation:
    def test_rejects_negative(self):
        with pytest.raises(ValueError):
            SaliencyMap(np.array([[1.0, -0.5]]))

    def test_rejects_non_2d(self):
        with pytest.raises(ValueError):
            SaliencyMap(np.zeros((3, 3, 3)))

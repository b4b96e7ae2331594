"""Portrait rendering: Lanczos resampling, crop extraction, full renders."""

import math

import numpy as np
import pytest

from cropflow import (
    CropBox,
    DimsMismatch,
    FrameDims,
    FrameSequence,
    InvalidBox,
    RGBFrame,
    RectBox,
    extract_crop,
    lanczos_resize,
    render_portrait,
    render_preview,
)
from cropflow.metrics import DenseTrack
from cropflow.render import portrait_output_width

from conftest import solid_frame, textured_frame


def lanczos3(x: np.ndarray) -> np.ndarray:
    out = np.sinc(x) * np.sinc(x / 3.0)
    return np.where(np.abs(x) < 3.0, out, 0.0)


def direct_resize(pixels: np.ndarray, out_w: int, out_h: int) -> np.ndarray:
    """Whole-kernel 2-D resample; the separable implementation's oracle."""
    in_h, in_w = pixels.shape[:2]
    img = pixels.astype(np.float64)
    out = np.zeros((out_h, out_w, 3), dtype=np.float64)
    sy = in_h / out_h
    sx = in_w / out_w
    for oy in range(out_h):
        src_y = (oy + 0.5) * sy - 0.5
        jy = math.floor(src_y)
        ys = np.arange(jy - 2, jy + 4)
        wy = lanczos3(src_y - ys)
        ys = np.clip(ys, 0, in_h - 1)
        for ox in range(out_w):
            src_x = (ox + 0.5) * sx - 0.5
            jx = math.floor(src_x)
            xs = np.arange(jx - 2, jx + 4)
            wx = lanczos3(src_x - xs)
            xs = np.clip(xs, 0, in_w - 1)
            w2 = np.outer(wy, wx)
            patch = img[np.ix_(ys, xs)]
            val = (w2[..., None] * patch).sum(axis=(0, 1)) / w2.sum()
            out[oy, ox] = val
    return np.clip(np.rint(out), 0, 255).astype(np.uint8)


class TestLanczosResize:
    def test_identity_is_bit_exact(self):
        f = textured_frame(1, 64, 48)
        out = lanczos_resize(f, 64, 48)
        assert np.array_equal(out.pixels, f.pixels)

    def test_constant_image_invariance(self):
        f = solid_frame(40, 30, (137, 42, 200))
        for w, h in [(80, 60), (17, 23), (200, 16)]:
            out = lanczos_resize(f, w, h)
            assert (out.width, out.height) == (w, h)
            assert np.all(out.pixels[..., 0] == 137)
            assert np.all(out.pixels[..., 1] == 42)
            assert np.all(out.pixels[..., 2] == 200)

    def test_matches_direct_2d_oracle(self):
        rng = np.random.default_rng(31)
        for i in range(8):
            pixels = rng.integers(0, 256, (64, 64, 3), dtype=np.uint8)
            out_w, out_h = int(rng.integers(17, 97)), int(rng.integers(17, 97))
            got = lanczos_resize(RGBFrame(pixels), out_w, out_h).pixels
            want = direct_resize(pixels, out_w, out_h)
            assert np.max(np.abs(got.astype(int) - want.astype(int))) <= 1

    def test_upscale_downscale_shapes(self):
        f = textured_frame(2, 64, 48)
        assert lanczos_resize(f, 128, 96).pixels.shape == (96, 128, 3)
        assert lanczos_resize(f, 32, 24).pixels.shape == (24, 32, 3)

    def test_output_dims_validated(self):
        f = textured_frame(2, 64, 48)
        with pytest.raises(ValueError):
            lanczos_resize(f, 0, 48)
        with pytest.raises(ValueError):
            lanczos_resize(f, 48, -2)

    def test_smooth_gradient_preserved_closely(self):
        ramp = np.tile(np.arange(64, dtype=np.uint8) * 4, (48, 1))
        f = RGBFrame(np.stack([ramp] * 3, axis=-1))
        out = lanczos_resize(f, 32, 24)
        mid = out.pixels[12, :, 0].astype(np.float64)
        assert np.all(np.diff(mid) >= -1)  # monotone up to rounding


class TestExtractCrop:
    def test_edges_round_half_up(self):
        f = textured_frame(3, 64, 48)
        out = extract_crop(f, RectBox(10.5, 8.49, 20.5, 20.49))
        # 10.5 -> 11, 20.5 -> 21, 8.49 -> 8, 20.49 -> 20: 10x12 crop.
        assert (out.width, out.height) == (10, 12)
        assert np.array_equal(out.pixels, f.pixels[8:20, 11:21])

    def test_odd_spans_shrink_to_even(self):
        f = textured_frame(3, 64, 48)
        out = extract_crop(f, RectBox(0.0, 0.0, 5.0, 4.0))
        assert (out.width, out.height) == (4, 4)
        assert np.array_equal(out.pixels, f.pixels[0:4, 0:4])

    def test_clamped_to_frame(self):
        f = textured_frame(3, 64, 48)
        out = extract_crop(f, RectBox(-10.0, -10.0, 200.0, 200.0))
        assert (out.width, out.height) == (64, 48)

    def test_empty_after_clamp_rejected(self):
        f = textured_frame(3, 64, 48)
        with pytest.raises(InvalidBox):
            extract_crop(f, RectBox(100.0, 100.0, 120.0, 120.0))

    def test_full_height_center_at_1080p(self):
        f = textured_frame(3, 1920, 1080)
        rect = RectBox(656.25, 0.0, 1263.75, 1080.0)
        out = extract_crop(f, rect)
        assert (out.width, out.height) == (608, 1080)


class TestOutputWidth:
    @pytest.mark.parametrize("h,w", [(1080, 608), (720, 404), (216, 122), (108, 60)])
    def test_even_nine_sixteenths(self, h, w):
        assert portrait_output_width(h) == w
        assert portrait_output_width(h) % 2 == 0


class TestRenderPortrait:
    def test_output_dims_1080p(self):
        frames = FrameSequence([textured_frame(4, 1920, 1080)] * 3)
        boxes = [CropBox(960.0, 540.0, 1.0)] * 3
        track = DenseTrack(tuple(boxes), FrameDims(1920, 1080))
        out = render_portrait(frames, track, out_height=1080)
        assert len(out) == 3
        for i in range(3):
            assert (out[i].width, out[i].height) == (608, 1080)

    def test_small_render(self):
        frames = FrameSequence([textured_frame(4, 384, 216)] * 2)
        track = DenseTrack((CropBox(192.0, 108.0, 0.5),) * 2, FrameDims(384, 216))
        out = render_portrait(frames, track, out_height=216)
        assert (out[0].width, out[0].height) == (122, 216)

    def test_accepts_plain_box_list(self):
        frames = FrameSequence([textured_frame(4, 384, 216)] * 2)
        out = render_portrait(frames, [CropBox(192.0, 108.0, 0.5)] * 2, out_height=216)
        assert len(out) == 2

    def test_length_mismatch(self):
        frames = FrameSequence([textured_frame(4, 384, 216)] * 3)
        with pytest.raises(DimsMismatch):
            render_portrait(frames, [CropBox(192.0, 108.0, 0.5)] * 2, out_height=216)

    def test_min_height(self):
        frames = FrameSequence([textured_frame(4, 384, 216)])
        with pytest.raises(ValueError):
            render_portrait(frames, [CropBox(192.0, 108.0, 0.5)], out_height=8)

    def test_frame_errors_carry_frame_number(self):
        # Full height on a 108-wide frame needs width 121.5: impossible.
        frames = FrameSequence([textured_frame(4, 108, 216)] * 2)
        with pytest.raises(InvalidBox, match="frame 0"):
            render_portrait(frames, [CropBox(54.0, 108.0, 1.0)] * 2, out_height=216)

    def test_identity_passthrough_is_lossless(self):
        # Extracting exactly the full 608x1080 band and resizing to 608x1080
        # must reproduce the source pixels bit-exactly.
        f = textured_frame(5, 1920, 1080)
        frames = FrameSequence([f])
        track = DenseTrack((CropBox(960.0, 540.0, 1.0),), FrameDims(1920, 1080))
        out = render_portrait(frames, track, out_height=1080)
        assert np.array_equal(out[0].pixels, f.pixels[:, 656:1264])


class TestRenderPreview:
    def test_single_frame(self):
        f = textured_frame(6, 384, 216)
        out = render_preview(f, CropBox(192.0, 108.0, 0.5), out_height=216)
        assert (out.width, out.height) == (122, 216)

    def test_default_height(self):
        f = textured_frame(6, 1920, 1080)
        out = render_preview(f, CropBox(960.0, 540.0, 0.5))
        assert (out.width, out.height) == (608, 1080)

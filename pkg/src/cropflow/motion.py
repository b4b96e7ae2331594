"""Pyramidal Lucas-Kanade point tracking over grayscale frames.

The tracker follows the classic coarse-to-fine scheme: a low-pass pyramid is
built per frame, the displacement is solved iteratively at the coarsest
level, and each solution seeds the next finer level. A single implementation
tracks whole batches of points at once; the public single-point entry points
wrap it.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DimsMismatch, PyramidError
from .frames import FrameSequence, GrayFrame, IdentityCache

try:
    from numba import njit

    _HAVE_NUMBA = True
except ImportError:  # pragma: no cover - numba is an optional accelerator
    _HAVE_NUMBA = False


@dataclass(frozen=True)
class TrackConfig:
    """Tuning knobs for the pyramidal tracker."""

    pyramid_levels: int = 3
    window_radius: int = 10
    max_iterations: int = 30
    epsilon: float = 0.01
    min_eigenvalue: float = 1e-4

    def __post_init__(self):
        if self.pyramid_levels < 1:
            raise ValueError("pyramid_levels must be at least 1")
        if self.window_radius < 2:
            raise ValueError("window_radius must be at least 2")
        if self.max_iterations < 1:
            raise ValueError("max_iterations must be at least 1")
        if self.epsilon <= 0.0:
            raise ValueError("epsilon must be positive")

    @property
    def window_size(self) -> int:
        return 2 * self.window_radius + 1


@dataclass(frozen=True)
class TrackResult:
    """Outcome of tracking one point.

    ``failed_hop`` is only set by chain_track: the source frame index of the
    first hop that failed to converge.
    """

    point: tuple[float, float]
    converged: bool
    residual: float
    failed_hop: int | None = None


def _smooth5(plane: np.ndarray) -> np.ndarray:
    """Separable 5-tap low-pass (1, 4, 6, 4, 1)/16 with edge replication."""
    p = np.pad(plane, ((2, 2), (0, 0)), mode="edge")
    v = (p[:-4] + 4.0 * p[1:-3] + 6.0 * p[2:-2] + 4.0 * p[3:-1] + p[4:]) * np.float32(1.0 / 16.0)
    p = np.pad(v, ((0, 0), (2, 2)), mode="edge")
    return (p[:, :-4] + 4.0 * p[:, 1:-3] + 6.0 * p[:, 2:-2] + 4.0 * p[:, 3:-1] + p[:, 4:]) * np.float32(
        1.0 / 16.0
    )


def build_pyramid(frame: GrayFrame, levels: int, min_size: int = 21) -> list[GrayFrame]:
    """Low-pass pyramid with 2x downsampling per level; level 0 is the input.

    ``min_size`` is the smallest window the caller intends to use; the frame
    must be at least 2^(levels-1) * min_size on each side so that the top
    level still contains a full window.
    """
    if levels < 1:
        raise ValueError("levels must be at least 1")
    need = (2 ** (levels - 1)) * min_size
    if min(frame.width, frame.height) < need:
        raise PyramidError(
            f"frame {frame.width}x{frame.height} too small for {levels} levels "
            f"(needs at least {need} on each side)"
        )
    out = [frame]
    plane = np.ascontiguousarray(frame.pixels, dtype=np.float32)
    for _ in range(levels - 1):
        plane = _smooth5(plane)[::2, ::2]
        out.append(GrayFrame(plane))
    return out


class PyramidCache:
    """Per-frame pyramid reuse, keyed by the identity of the luma array."""

    def __init__(self, maxsize: int = 8):
        self._cache = IdentityCache(maxsize=maxsize)

    def get(self, frame: GrayFrame, cfg: TrackConfig) -> list[GrayFrame]:
        key = (cfg.pyramid_levels, cfg.window_size)
        return self._cache.get(
            frame.pixels, key, lambda: build_pyramid(frame, cfg.pyramid_levels, cfg.window_size)
        )


def _sample_windows(plane: np.ndarray, pts: np.ndarray, half: int) -> np.ndarray:
    """Bilinear-sample square windows of side 2*half+1 centered at pts.

    ``pts`` is (n, 2) in (x, y) order. Sampling clamps to the frame edge.
    Returns (n, 2*half+1, 2*half+1) float32.
    """
    h, w = plane.shape
    x = pts[:, 0]
    y = pts[:, 1]
    ix = np.floor(x).astype(np.int64)
    iy = np.floor(y).astype(np.int64)
    if (
        (ix >= half).all()
        and (iy >= half).all()
        and (ix <= w - half - 2).all()
        and (iy <= h - half - 2).all()
    ):
        # Whole windows are interior: one gather, shared fractional offsets.
        fx = (x - ix).astype(np.float32)[:, None, None]
        fy = (y - iy).astype(np.float32)[:, None, None]
        offs = np.arange(-half, half + 2)
        patch = plane[(iy[:, None] + offs)[:, :, None], (ix[:, None] + offs)[:, None, :]]
        a = patch[:, :-1, :-1]
        b = patch[:, :-1, 1:]
        c = patch[:, 1:, :-1]
        d = patch[:, 1:, 1:]
        top = a + fx * (b - a)
        bot = c + fx * (d - c)
        return top + fy * (bot - top)
    offs = np.arange(-half, half + 1, dtype=np.float64)
    xs = np.clip(x[:, None] + offs[None, :], 0.0, w - 1.000001)
    ys = np.clip(y[:, None] + offs[None, :], 0.0, h - 1.000001)
    ixs = xs.astype(np.int64)
    iys = ys.astype(np.int64)
    fx = (xs - ixs).astype(np.float32)[:, None, :]
    fy = (ys - iys).astype(np.float32)[:, :, None]
    rows = iys[:, :, None]
    cols = ixs[:, None, :]
    a = plane[rows, cols]
    b = plane[rows, cols + 1]
    c = plane[rows + 1, cols]
    d = plane[rows + 1, cols + 1]
    top = a + fx * (b - a)
    bot = c + fx * (d - c)
    return top + fy * (bot - top)


def _lk_batch_numpy(
    src_pyr: list[GrayFrame],
    dst_pyr: list[GrayFrame],
    pts: np.ndarray,
    cfg: TrackConfig,
    want_residual: bool = True,
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Track points from src to dst given both pyramids.

    ``pts`` is (n, 2) float in level-0 coordinates. Returns (points, ok,
    residual): tracked positions, per-point convergence, and the mean
    absolute photometric window error at the final position (zeros when
    ``want_residual`` is off).
    """
    n = pts.shape[0]
    rad = cfg.window_radius
    npix = float(cfg.window_size**2)
    v = np.zeros((n, 2), dtype=np.float64)
    ok = np.ones(n, dtype=bool)
    eps2 = cfg.epsilon * cfg.epsilon
    hit_eps = np.zeros(n, dtype=bool)
    vals0 = None

    for level in reversed(range(len(src_pyr))):
        scale = 2.0**level
        base = pts / scale
        src = src_pyr[level].pixels
        dst = dst_pyr[level].pixels

        patch = _sample_windows(src, base, rad + 1)
        gx = 0.5 * (patch[:, 1:-1, 2:] - patch[:, 1:-1, :-2])
        gy = 0.5 * (patch[:, 2:, 1:-1] - patch[:, :-2, 1:-1])
        vals = patch[:, 1:-1, 1:-1]
        if level == 0:
            vals0 = vals
        gxx = np.einsum("nij,nij->n", gx, gx)
        gxy = np.einsum("nij,nij->n", gx, gy)
        gyy = np.einsum("nij,nij->n", gy, gy)
        trace = gxx + gyy
        det = gxx * gyy - gxy * gxy
        min_eig = 0.5 * (trace - np.sqrt(np.maximum(trace * trace - 4.0 * det, 0.0))) / npix
        ok &= min_eig >= cfg.min_eigenvalue

        safe_det = np.where(det > 0.0, det, 1.0)
        active = ok.copy()
        hit_eps = np.zeros(n, dtype=bool)
        for _ in range(cfg.max_iterations):
            if not active.any():
                break
            dvals = _sample_windows(dst, base + v, rad)
            diff = vals - dvals
            bx = np.einsum("nij,nij->n", diff, gx)
            by = np.einsum("nij,nij->n", diff, gy)
            ux = (gyy * bx - gxy * by) / safe_det
            uy = (gxx * by - gxy * bx) / safe_det
            step = np.stack([ux, uy], axis=1).astype(np.float64)
            step[~active] = 0.0
            v += step
            small = (ux * ux + uy * uy) < eps2
            hit_eps |= active & small
            active &= ~small
        if level > 0:
            v *= 2.0

    out = pts + v
    ok &= hit_eps
    # A converged point must stay near the frame: within bounds padded by
    # one window radius.
    h, w = src_pyr[0].pixels.shape
    inside = (
        (out[:, 0] >= -rad)
        & (out[:, 0] <= w - 1 + rad)
        & (out[:, 1] >= -rad)
        & (out[:, 1] <= h - 1 + rad)
    )
    ok &= inside

    if not want_residual:
        return out, ok, np.zeros(n, dtype=np.float64)
    fdst = _sample_windows(dst_pyr[0].pixels, out, rad)
    residual = np.abs(vals0 - fdst).mean(axis=(1, 2)).astype(np.float64)
    return out, ok, residual


if _HAVE_NUMBA:

    @njit(cache=True)
    def _lk_level_jit(src, dst, bx, by, v, ok, hit_eps, rad, max_iter, eps2, min_eig_thr):
        """One pyramid level of the iterative solve, updating v in place.

        Scalar port of the vectorized level step in ``_lk_batch_numpy``:
        same clamped bilinear sampling, same gradient matrix and minimum
        eigenvalue test, same update rule and stop condition.
        """
        h, w = src.shape
        n = bx.shape[0]
        p_side = 2 * rad + 3
        w_side = 2 * rad + 1
        npix = float(w_side * w_side)
        xmax = w - 1.000001
        ymax = h - 1.000001
        patch = np.empty((p_side, p_side), np.float32)
        gx = np.empty((w_side, w_side), np.float32)
        gy = np.empty((w_side, w_side), np.float32)
        vals = np.empty((w_side, w_side), np.float32)
        for p in range(n):
            hit_eps[p] = False
            if not ok[p]:
                continue
            x0 = bx[p]
            y0 = by[p]
            for j in range(p_side):
                yy = y0 + (j - rad - 1)
                if yy < 0.0:
                    yy = 0.0
                elif yy > ymax:
                    yy = ymax
                iy = int(yy)
                fy = np.float32(yy - iy)
                for i in range(p_side):
                    xx = x0 + (i - rad - 1)
                    if xx < 0.0:
                        xx = 0.0
                    elif xx > xmax:
                        xx = xmax
                    ix = int(xx)
                    fx = np.float32(xx - ix)
                    a = src[iy, ix]
                    b = src[iy, ix + 1]
                    c = src[iy + 1, ix]
                    d = src[iy + 1, ix + 1]
                    top = a + fx * (b - a)
                    bot = c + fx * (d - c)
                    patch[j, i] = top + fy * (bot - top)
            gxx = 0.0
            gxy = 0.0
            gyy = 0.0
            for j in range(w_side):
                for i in range(w_side):
                    gxv = np.float32(0.5) * (patch[j + 1, i + 2] - patch[j + 1, i])
                    gyv = np.float32(0.5) * (patch[j + 2, i + 1] - patch[j, i + 1])
                    gx[j, i] = gxv
                    gy[j, i] = gyv
                    vals[j, i] = patch[j + 1, i + 1]
                    gxx += gxv * gxv
                    gxy += gxv * gyv
                    gyy += gyv * gyv
            trace = gxx + gyy
            det = gxx * gyy - gxy * gxy
            disc = trace * trace - 4.0 * det
            if disc < 0.0:
                disc = 0.0
            min_eig = 0.5 * (trace - np.sqrt(disc)) / npix
            if min_eig < min_eig_thr or det <= 0.0:
                ok[p] = False
                continue
            vx = v[p, 0]
            vy = v[p, 1]
            for _ in range(max_iter):
                bsum_x = 0.0
                bsum_y = 0.0
                for j in range(w_side):
                    yy = y0 + vy + (j - rad)
                    if yy < 0.0:
                        yy = 0.0
                    elif yy > ymax:
                        yy = ymax
                    iy = int(yy)
                    fy = np.float32(yy - iy)
                    for i in range(w_side):
                        xx = x0 + vx + (i - rad)
                        if xx < 0.0:
                            xx = 0.0
                        elif xx > xmax:
                            xx = xmax
                        ix = int(xx)
                        fx = np.float32(xx - ix)
                        a = dst[iy, ix]
                        b = dst[iy, ix + 1]
                        c = dst[iy + 1, ix]
                        d = dst[iy + 1, ix + 1]
                        top = a + fx * (b - a)
                        bot = c + fx * (d - c)
                        dval = top + fy * (bot - top)
                        diff = vals[j, i] - dval
                        bsum_x += diff * gx[j, i]
                        bsum_y += diff * gy[j, i]
                ux = (gyy * bsum_x - gxy * bsum_y) / det
                uy = (gxx * bsum_y - gxy * bsum_x) / det
                vx += ux
                vy += uy
                if ux * ux + uy * uy < eps2:
                    hit_eps[p] = True
                    break
            v[p, 0] = vx
            v[p, 1] = vy

    def _lk_batch_jit(
        src_pyr: list[GrayFrame],
        dst_pyr: list[GrayFrame],
        pts: np.ndarray,
        cfg: TrackConfig,
        want_residual: bool = True,
    ) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Compiled twin of ``_lk_batch_numpy`` with identical semantics."""
        n = pts.shape[0]
        rad = cfg.window_radius
        v = np.zeros((n, 2), dtype=np.float64)
        ok = np.ones(n, dtype=np.bool_)
        hit_eps = np.zeros(n, dtype=np.bool_)
        eps2 = cfg.epsilon * cfg.epsilon
        for level in reversed(range(len(src_pyr))):
            scale = 2.0**level
            base = pts / scale
            _lk_level_jit(
                src_pyr[level].pixels,
                dst_pyr[level].pixels,
                np.ascontiguousarray(base[:, 0]),
                np.ascontiguousarray(base[:, 1]),
                v,
                ok,
                hit_eps,
                rad,
                cfg.max_iterations,
                eps2,
                cfg.min_eigenvalue,
            )
            if level > 0:
                v *= 2.0
        out = pts + v
        ok = ok & hit_eps
        h, w = src_pyr[0].pixels.shape
        inside = (
            (out[:, 0] >= -rad)
            & (out[:, 0] <= w - 1 + rad)
            & (out[:, 1] >= -rad)
            & (out[:, 1] <= h - 1 + rad)
        )
        ok &= inside
        if not want_residual:
            return out, ok, np.zeros(n, dtype=np.float64)
        vals0 = _sample_windows(src_pyr[0].pixels, pts, rad)
        fdst = _sample_windows(dst_pyr[0].pixels, out, rad)
        residual = np.abs(vals0 - fdst).mean(axis=(1, 2)).astype(np.float64)
        return out, ok, residual


def _lk_batch(
    src_pyr: list[GrayFrame],
    dst_pyr: list[GrayFrame],
    pts: np.ndarray,
    cfg: TrackConfig,
    want_residual: bool = True,
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    if _HAVE_NUMBA:
        return _lk_batch_jit(src_pyr, dst_pyr, pts, cfg, want_residual)
    return _lk_batch_numpy(src_pyr, dst_pyr, pts, cfg, want_residual)


def track_point(
    src: GrayFrame,
    dst: GrayFrame,
    p: tuple[float, float],
    cfg: TrackConfig = TrackConfig(),
    cache: PyramidCache | None = None,
) -> TrackResult:
    """Track a single point from ``src`` to ``dst``.

    The point must lie inside the source frame. The result is flagged
    unconverged when the local structure is too flat (minimum eigenvalue of
    the gradient matrix below threshold) or the iteration budget runs out
    before the update shrinks under epsilon.
    """
    if src.dims != dst.dims:
        raise DimsMismatch(f"source is {src.width}x{src.height}, target {dst.width}x{dst.height}")
    x, y = p
    if not (0.0 <= x <= src.width - 1 and 0.0 <= y <= src.height - 1):
        raise ValueError(f"point ({x}, {y}) outside frame {src.width}x{src.height}")
    if cache is not None:
        src_pyr = cache.get(src, cfg)
        dst_pyr = cache.get(dst, cfg)
    else:
        src_pyr = build_pyramid(src, cfg.pyramid_levels, cfg.window_size)
        dst_pyr = build_pyramid(dst, cfg.pyramid_levels, cfg.window_size)
    pts = np.array([[x, y]], dtype=np.float64)
    out, ok, residual = _lk_batch(src_pyr, dst_pyr, pts, cfg)
    return TrackResult(
        point=(float(out[0, 0]), float(out[0, 1])),
        converged=bool(ok[0]),
        residual=float(residual[0]),
    )


def chain_track(
    frames: FrameSequence,
    p: tuple[float, float],
    from_idx: int,
    to_idx: int,
    cfg: TrackConfig = TrackConfig(),
    cache: PyramidCache | None = None,
) -> TrackResult:
    """Track a point hop by hop through every intermediate native frame.

    Bridges sparse annotations whose frames are several native frames apart.
    On a failed hop the result carries the last successfully tracked point,
    converged=False, and the source index of the failing hop.
    """
    count = len(frames)
    if not (0 <= from_idx < count and 0 <= to_idx < count):
        raise IndexError(f"frame indices ({from_idx}, {to_idx}) outside 0..{count - 1}")
    if from_idx == to_idx:
        raise ValueError("chain_track needs distinct start and end frames")
    if cache is None:
        cache = PyramidCache()
    step = 1 if to_idx > from_idx else -1
    dims = frames.dims
    point = (float(p[0]), float(p[1]))
    residual = 0.0
    for idx in range(from_idx, to_idx, step):
        # A hop may legally end slightly outside the frame (the bounds window
        # is padded by one radius), but such a point cannot seed another hop.
        if not (0.0 <= point[0] <= dims.width - 1 and 0.0 <= point[1] <= dims.height - 1):
            return TrackResult(point=point, converged=False, residual=residual, failed_hop=idx)
        result = track_point(frames.gray(idx), frames.gray(idx + step), point, cfg, cache)
        if not result.converged:
            return TrackResult(point=point, converged=False, residual=result.residual, failed_hop=idx)
        point = result.point
        residual = result.residual
    return TrackResult(point=point, converged=True, residual=residual)

"""Sparse optical flow: corner detection, image pyramids and iterative
pyramidal tracking over a sliding four-frame window.

All detector and tracker math is implemented here from first principles;
the only external machinery is numpy array storage and numba compilation
of the per-pixel and per-point loops.

Pixel coordinates are (x, y) = (column, row) with x increasing rightward in
the image, matching increasing bearings and sector indices.
"""

from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass

import numpy as np
from numba import njit

from .config import VisionParams
from .sensors import ImageFrame

# Corner responses below this absolute floor are treated as zero texture.
# Rank-one structure (straight edges, smooth gradients) produces minimum
# eigenvalues at round-off scale; without a floor the relative quality
# threshold would promote that noise to corners on featureless frames.
_RESPONSE_FLOOR = 1e-3

# A tracking window whose spatial gradient matrix has a minimum eigenvalue
# below this is considered textureless and the point is dropped.
_SINGULAR_EIG = 1e-6

# Structure-tensor window used to localize corners. Deliberately smaller
# than the tracking window: a wide response window peaks up to half its
# width away from a step corner (the Sobel rows straddling the contrast
# flip cancel), while a 3x3 tensor pins the maximum to the corner pixel.
_TENSOR_WINDOW = 3


@dataclass(frozen=True)
class Corner:
    """A detected corner: subpixel-free (x, y) position and its response."""

    position: tuple[float, float]
    score: float


@dataclass(frozen=True)
class FlowTrack:
    """One feature tracked across four consecutive frames (three steps).

    ``steps`` holds the three per-step displacement vectors, shape (3, 2).
    ``magnitude`` is the mean of the three per-step displacement norms.
    ``sector_column`` is the feature's final image column, used to assign
    the track to an angular sector. ``valid`` is False when any step failed
    to converge or left the frame.
    """

    origin: tuple[float, float]
    steps: np.ndarray
    magnitude: float
    sector_column: float
    valid: bool


def _as_pixels(frame) -> np.ndarray:
    pixels = frame.pixels if isinstance(frame, ImageFrame) else np.asarray(frame)
    if pixels.ndim != 2:
        raise ValueError(f"expected a 2-D grayscale image, got shape {pixels.shape}")
    return pixels


def grayscale(rgb, timestamp: float = 0.0) -> ImageFrame:
    """Convert an RGB image to luma (0.299 R + 0.587 G + 0.114 B).

    Accepts an (H, W, 3) array or a sequence of three equally sized planes.
    Raises ValueError when channel dimensions do not match.
    """
    if isinstance(rgb, np.ndarray) and rgb.ndim == 3:
        if rgb.shape[2] != 3:
            raise ValueError(f"expected 3 channels, got {rgb.shape[2]}")
        r, g, b = rgb[..., 0], rgb[..., 1], rgb[..., 2]
    else:
        planes = [np.asarray(p) for p in rgb]
        if len(planes) != 3:
            raise ValueError(f"expected 3 channel planes, got {len(planes)}")
        if not (planes[0].shape == planes[1].shape == planes[2].shape):
            raise ValueError(f"channel dimensions do not match: "
                             f"{[p.shape for p in planes]}")
        r, g, b = planes
    luma = 0.299 * r.astype(np.float64) + 0.587 * g.astype(np.float64) \
        + 0.114 * b.astype(np.float64)
    pixels = np.clip(np.round(luma), 0, 255).astype(np.uint8)
    return ImageFrame(width=pixels.shape[1], height=pixels.shape[0],
                      pixels=pixels, timestamp=timestamp)


@njit(cache=True)
def _min_eig_kernel(img, window):
    """Minimum eigenvalue of the windowed gradient structure tensor.

    Sobel gradients feed per-pixel products which are box-summed over a
    ``window``-sized square by sliding accumulation. All intermediate values
    are integers held in float64, so the sums are exact regardless of
    accumulation order.
    """
    height, width = img.shape
    half = window // 2
    gxx = np.zeros((height, width))
    gxy = np.zeros((height, width))
    gyy = np.zeros((height, width))
    for y in range(1, height - 1):
        for x in range(1, width - 1):
            gx = (img[y - 1, x + 1] + 2.0 * img[y, x + 1] + img[y + 1, x + 1]
                  - img[y - 1, x - 1] - 2.0 * img[y, x - 1] - img[y + 1, x - 1])
            gy = (img[y + 1, x - 1] + 2.0 * img[y + 1, x] + img[y + 1, x + 1]
                  - img[y - 1, x - 1] - 2.0 * img[y - 1, x] - img[y - 1, x + 1])
            gxx[y, x] = gx * gx
            gxy[y, x] = gx * gy
            gyy[y, x] = gy * gy
    # Slide a width-`window` sum along x, writing at window centers.
    sxx = np.zeros((height, width))
    sxy = np.zeros((height, width))
    syy = np.zeros((height, width))
    x_lo = 1 + half
    x_hi = width - 1 - half
    for y in range(1, height - 1):
        axx = 0.0
        axy = 0.0
        ayy = 0.0
        for x in range(1, 1 + window):
            axx += gxx[y, x]
            axy += gxy[y, x]
            ayy += gyy[y, x]
        for cx in range(x_lo, x_hi):
            sxx[y, cx] = axx
            sxy[y, cx] = axy
            syy[y, cx] = ayy
            lead = cx + half + 1
            trail = cx - half
            if lead < width - 1:
                axx += gxx[y, lead] - gxx[y, trail]
                axy += gxy[y, lead] - gxy[y, trail]
                ayy += gyy[y, lead] - gyy[y, trail]
    # Slide along y and evaluate the closed-form minimum eigenvalue.
    response = np.zeros((height, width))
    y_lo = 1 + half
    y_hi = height - 1 - half
    for cx in range(x_lo, x_hi):
        axx = 0.0
        axy = 0.0
        ayy = 0.0
        for y in range(1, 1 + window):
            axx += sxx[y, cx]
            axy += sxy[y, cx]
            ayy += syy[y, cx]
        for cy in range(y_lo, y_hi):
            tr = axx + ayy
            diff = axx - ayy
            lam = 0.5 * (tr - math.sqrt(diff * diff + 4.0 * axy * axy))
            response[cy, cx] = lam if lam > 0.0 else 0.0
            lead = cy + half + 1
            trail = cy - half
            if lead < height - 1:
                axx += sxx[lead, cx] - sxx[trail, cx]
                axy += sxy[lead, cx] - sxy[trail, cx]
                ayy += syy[lead, cx] - syy[trail, cx]
    return response


def min_eigenvalue_map(frame, window: int = 15) -> np.ndarray:
    """Corner response map (Shi-Tomasi minimum eigenvalue) of a frame.

    The response is defined where the full Sobel-plus-window footprint fits
    inside the frame and is zero on the border band.
    """
    pixels = _as_pixels(frame)
    if window < 3 or window % 2 == 0:
        raise ValueError(f"window must be an odd integer >= 3, got {window}")
    if min(pixels.shape) < window + 2:
        raise ValueError(f"frame {pixels.shape} too small for window {window}")
    return _min_eig_kernel(pixels.astype(np.float64), window)


@njit(cache=True)
def _collect_local_maxima(response, threshold, margin):
    """Positions and scores of strict-neighborhood local maxima above
    ``threshold``, at least ``margin`` pixels from every border."""
    height, width = response.shape
    cap = (height * width) // 4 + 64
    xs = np.empty(cap, np.int64)
    ys = np.empty(cap, np.int64)
    scores = np.empty(cap, np.float64)
    count = 0
    y_hi = height - margin
    x_hi = width - margin
    for y in range(margin, y_hi):
        for x in range(margin, x_hi):
            v = response[y, x]
            if v <= threshold:
                continue
            if (v >= response[y - 1, x - 1] and v >= response[y - 1, x]
                    and v >= response[y - 1, x + 1] and v >= response[y, x - 1]
                    and v > response[y, x + 1] and v > response[y + 1, x - 1]
                    and v > response[y + 1, x] and v > response[y + 1, x + 1]):
                xs[count] = x
                ys[count] = y
                scores[count] = v
                count += 1
    return xs[:count], ys[:count], scores[:count]


@njit(cache=True)
def _greedy_spacing(xs, ys, order, min_dist, max_keep, width, height):
    """Greedy strongest-first selection enforcing a minimum spacing.

    Uses a uniform grid of ``min_dist`` cells so each candidate only checks
    accepted points in the 3x3 neighboring cells.
    """
    cell = min_dist
    gw = int(width / cell) + 1
    gh = int(height / cell) + 1
    head = np.full(gw * gh, -1, np.int64)
    nxt = np.full(order.size, -1, np.int64)
    keep = np.empty(order.size, np.int64)
    kept = 0
    min_d2 = min_dist * min_dist
    for oi in range(order.size):
        i = order[oi]
        x = xs[i]
        y = ys[i]
        cx = int(x / cell)
        cy = int(y / cell)
        ok = True
        for ny in range(max(cy - 1, 0), min(cy + 2, gh)):
            for nx in range(max(cx - 1, 0), min(cx + 2, gw)):
                j = head[ny * gw + nx]
                while j >= 0:
                    ddx = float(x - xs[j])
                    ddy = float(y - ys[j])
                    if ddx * ddx + ddy * ddy < min_d2:
                        ok = False
                        break
                    j = nxt[j]
                if not ok:
                    break
            if not ok:
                break
        if ok:
            keep[kept] = i
            kept += 1
            slot = cy * gw + cx
            nxt[i] = head[slot]
            head[slot] = i
            if kept >= max_keep:
                break
    return keep[:kept]


def detect_corners(frame, params: VisionParams) -> list[Corner]:
    """Detect up to ``max_corners`` well-spaced strong corners.

    A pixel qualifies when its minimum-eigenvalue response exceeds
    ``quality_level`` times the strongest response in the frame, it is a
    local maximum of its 8-neighborhood, and it lies at least half a
    tracking window from every border. Survivors are accepted strongest
    first under the ``min_corner_distance`` spacing rule, with row-major
    order breaking score ties, so the result is deterministic.
    """
    pixels = _as_pixels(frame)
    response = min_eigenvalue_map(pixels, _TENSOR_WINDOW)
    peak = float(response.max())
    if peak <= _RESPONSE_FLOOR:
        return []
    threshold = max(params.quality_level * peak, _RESPONSE_FLOOR)
    margin = params.lk_window // 2
    xs, ys, scores = _collect_local_maxima(response, threshold, margin)
    if xs.size == 0:
        return []
    order = np.lexsort((xs, ys, -scores))
    keep = _greedy_spacing(xs, ys, order, float(params.min_corner_distance),
                           params.max_corners, pixels.shape[1], pixels.shape[0])
    return [Corner(position=(float(xs[i]), float(ys[i])), score=float(scores[i]))
            for i in keep]


def build_pyramid(frame, levels: int = 3) -> list[np.ndarray]:
    """Coarse-to-fine image pyramid; level 0 is the input frame as float64.

    Each level is blurred with the separable binomial kernel
    [1, 4, 6, 4, 1] (edge-replicated borders) and decimated by two. The
    weights sum to a power of two, so a uniform image stays exactly uniform
    at every level.
    """
    pixels = _as_pixels(frame).astype(np.float64)
    if levels < 1:
        raise ValueError(f"levels must be >= 1, got {levels}")
    if (min(pixels.shape) >> (levels - 1)) < 8:
        raise ValueError(f"frame {pixels.shape} too small for {levels} pyramid levels")
    pyramid = [pixels]
    for _ in range(levels - 1):
        prev = np.pad(pyramid[-1], 2, mode="edge")
        h = (prev[:, :-4] + 4.0 * prev[:, 1:-3] + 6.0 * prev[:, 2:-2]
             + 4.0 * prev[:, 3:-1] + prev[:, 4:])
        v = (h[:-4] + 4.0 * h[1:-3] + 6.0 * h[2:-2] + 4.0 * h[3:-1] + h[4:])
        pyramid.append((v / 256.0)[::2, ::2])
    return pyramid


@njit(cache=True)
def _lk_level(prev, nxt, px, py, dx, dy, status, half, max_iter, eps2):
    """One pyramid level of iterative tracking for a batch of points.

    For each point a bilinear patch of the previous frame is sampled once;
    gradients and the 2x2 normal matrix come from that patch. Iterations
    then sample only the moving window in the next frame. Points are marked
    failed when the matrix is near singular or any needed sample footprint
    leaves the frame.
    """
    height, width = prev.shape
    wlen = 2 * half + 1
    plen = wlen + 2
    patch = np.empty((plen, plen))
    gx = np.empty((wlen, wlen))
    gy = np.empty((wlen, wlen))
    pw = np.empty((wlen, wlen))
    for i in range(px.size):
        if not status[i]:
            continue
        x0 = px[i]
        y0 = py[i]
        ixb = int(math.floor(x0))
        iyb = int(math.floor(y0))
        if (ixb - half - 1 < 0 or ixb + half + 2 > width - 1
                or iyb - half - 1 < 0 or iyb + half + 2 > height - 1):
            status[i] = False
            continue
        fx = x0 - ixb
        fy = y0 - iyb
        w00 = (1.0 - fx) * (1.0 - fy)
        w01 = fx * (1.0 - fy)
        w10 = (1.0 - fx) * fy
        w11 = fx * fy
        for r in range(plen):
            yy = iyb - half - 1 + r
            for c in range(plen):
                xx = ixb - half - 1 + c
                patch[r, c] = (w00 * prev[yy, xx] + w01 * prev[yy, xx + 1]
                               + w10 * prev[yy + 1, xx] + w11 * prev[yy + 1, xx + 1])
        gxx = 0.0
        gxy = 0.0
        gyy = 0.0
        for r in range(wlen):
            for c in range(wlen):
                gxv = 0.5 * (patch[r + 1, c + 2] - patch[r + 1, c])
                gyv = 0.5 * (patch[r + 2, c + 1] - patch[r, c + 1])
                gx[r, c] = gxv
                gy[r, c] = gyv
                pw[r, c] = patch[r + 1, c + 1]
                gxx += gxv * gxv
                gxy += gxv * gyv
                gyy += gyv * gyv
        tr = gxx + gyy
        diff = gxx - gyy
        if 0.5 * (tr - math.sqrt(diff * diff + 4.0 * gxy * gxy)) < _SINGULAR_EIG:
            status[i] = False
            continue
        det = gxx * gyy - gxy * gxy
        for _ in range(max_iter):
            xt = x0 + dx[i]
            yt = y0 + dy[i]
            ixt = int(math.floor(xt))
            iyt = int(math.floor(yt))
            if (ixt - half < 0 or ixt + half + 1 > width - 1
                    or iyt - half < 0 or iyt + half + 1 > height - 1):
                status[i] = False
                break
            ftx = xt - ixt
            fty = yt - iyt
            t00 = (1.0 - ftx) * (1.0 - fty)
            t01 = ftx * (1.0 - fty)
            t10 = (1.0 - ftx) * fty
            t11 = ftx * fty
            bx = 0.0
            by = 0.0
            for r in range(wlen):
                yy = iyt - half + r
                for c in range(wlen):
                    xx = ixt - half + c
                    sample = (t00 * nxt[yy, xx] + t01 * nxt[yy, xx + 1]
                              + t10 * nxt[yy + 1, xx] + t11 * nxt[yy + 1, xx + 1])
                    d = pw[r, c] - sample
                    bx += d * gx[r, c]
                    by += d * gy[r, c]
            sx = (gyy * bx - gxy * by) / det
            sy = (gxx * by - gxy * bx) / det
            dx[i] += sx
            dy[i] += sy
            if sx * sx + sy * sy < eps2:
                break


def lk_track(prev_pyramid: list[np.ndarray], next_pyramid: list[np.ndarray],
             points, params: VisionParams,
             ) -> tuple[np.ndarray, np.ndarray]:
    """Track points from one pyramid to another.

    Args:
        prev_pyramid, next_pyramid: pyramids of two equally sized frames.
        points: (N, 2) array of (x, y) positions in the previous frame.
        params: window, iteration and convergence settings.

    Returns:
        ``(displacements, converged)``: an (N, 2) float array of estimated
        displacements at full resolution and an (N,) bool array, False where
        the normal matrix was near singular or the window left the frame at
        any level.
    """
    if len(prev_pyramid) != len(next_pyramid):
        raise ValueError("pyramids must have the same number of levels")
    for a, b in zip(prev_pyramid, next_pyramid):
        if a.shape != b.shape:
            raise ValueError(f"pyramid level shapes differ: {a.shape} vs {b.shape}")
    pts = np.asarray(points, dtype=np.float64).reshape(-1, 2)
    n = pts.shape[0]
    dx = np.zeros(n)
    dy = np.zeros(n)
    status = np.ones(n, dtype=np.bool_)
    if n == 0:
        return np.zeros((0, 2)), status
    half = params.lk_window // 2
    eps2 = params.lk_epsilon * params.lk_epsilon
    levels = len(prev_pyramid)
    for level in range(levels - 1, -1, -1):
        scale = float(2 ** level)
        if level < levels - 1:
            dx *= 2.0
            dy *= 2.0
        _lk_level(prev_pyramid[level], next_pyramid[level],
                  pts[:, 0] / scale, pts[:, 1] / scale,
                  dx, dy, status, half, params.lk_max_iterations, eps2)
    return np.column_stack((dx, dy)), status


def _chain_tracks(pyramids: list[list[np.ndarray]], corners: list[Corner],
                  params: VisionParams) -> list[FlowTrack]:
    """Track corners through three consecutive pyramid pairs and fold the
    per-step displacements into flow tracks."""
    if not corners:
        return []
    pts = np.array([c.position for c in corners], dtype=np.float64)
    current = pts.copy()
    valid = np.ones(pts.shape[0], dtype=np.bool_)
    steps = np.zeros((3, pts.shape[0], 2))
    for k in range(3):
        disp, ok = lk_track(pyramids[k], pyramids[k + 1], current, params)
        steps[k] = disp
        valid &= ok
        current = current + disp
    norms = np.sqrt((steps ** 2).sum(axis=2))
    magnitudes = norms.mean(axis=0)
    return [FlowTrack(origin=(float(pts[i, 0]), float(pts[i, 1])),
                      steps=steps[:, i].copy(),
                      magnitude=float(magnitudes[i]),
                      sector_column=float(current[i, 0]),
                      valid=bool(valid[i]))
            for i in range(pts.shape[0])]


def track_three_frames(frames, corners: list[Corner],
                       params: VisionParams) -> list[FlowTrack]:
    """Track corners of the oldest frame across four consecutive frames.

    ``frames`` must hold exactly four equally sized frames, oldest first;
    ``corners`` are positions in the oldest frame. A track is valid only if
    all three steps converged and stayed inside the frame.
    """
    if len(frames) != 4:
        raise ValueError(f"expected 4 frames, got {len(frames)}")
    pixel_arrays = [_as_pixels(f) for f in frames]
    shape = pixel_arrays[0].shape
    if any(p.shape != shape for p in pixel_arrays):
        raise ValueError("frames must share the same dimensions")
    pyramids = [build_pyramid(p, params.pyramid_levels) for p in pixel_arrays]
    return _chain_tracks(pyramids, corners, params)


class FeatureTracker:
    """Stateful sliding window over the last four camera frames.

    Pyramids are built once per pushed frame and reused for every tracking
    step that involves the frame, so per-tick work is one pyramid, one
    corner detection (on the frame that just became the oldest of the
    window) and three tracking steps.
    """

    def __init__(self, params: VisionParams):
        self.params = params
        self._window: deque = deque(maxlen=4)

    def push(self, frame) -> None:
        pixels = _as_pixels(frame)
        self._window.append((pixels, build_pyramid(pixels, self.params.pyramid_levels)))

    @property
    def ready(self) -> bool:
        return len(self._window) == 4

    def tracks(self) -> list[FlowTrack] | None:
        """Flow tracks for the current window, or None while fewer than four
        frames have been pushed (camera occupancy unavailable)."""
        if not self.ready:
            return None
        corners = detect_corners(self._window[0][0], self.params)
        pyramids = [entry[1] for entry in self._window]
        return _chain_tracks(pyramids, corners, self.params)

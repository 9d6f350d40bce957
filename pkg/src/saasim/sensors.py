"""Simulated sensors: a planar lidar and a rendered monocular camera.

The camera is a software pinhole with square pixels looking along the
vehicle heading. Every image column corresponds to one planar ray; a column
that hits an obstacle is filled with a perspective-correct procedural
texture anchored to the obstacle surface, so the texture translates with
the world and not with the camera. Columns that miss show two smooth
vertical gradients (sky above the horizon, ground below) that are constant
per row and therefore contain no trackable corners.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from numba import njit

from .config import SensorParams
from .world import Circle, QuadState, Scenario, cast_rays

# Checker tile side on obstacle surfaces, meters. The noise lattice is
# coarser so the pattern never repeats exactly.
_TILE = 0.125
_NOISE_CELL = 0.5


@dataclass(frozen=True)
class LidarScan:
    """One planar scan. Azimuths are body-frame bearings, strictly
    increasing over [-pi, pi); ranges are clamped to ``max_range``."""

    azimuths: np.ndarray
    ranges: np.ndarray
    max_range: float
    timestamp: float


@dataclass(frozen=True)
class ImageFrame:
    """A grayscale camera frame; ``pixels`` has shape (height, width)."""

    width: int
    height: int
    pixels: np.ndarray
    timestamp: float


def simulate_lidar(scenario: Scenario, state: QuadState,
                   params: SensorParams) -> LidarScan:
    """Cast one beam per azimuth bin around the vehicle.

    Beam k points at body bearing ``-pi + k * 2pi / beams``; each range is a
    single planar ray cast clamped to the lidar range.
    """
    beams = params.lidar_beams
    azimuths = -math.pi + 2.0 * math.pi * np.arange(beams) / beams
    ranges, _ = cast_rays(scenario, (state.x, state.y), state.psi + azimuths,
                          params.lidar_range)
    return LidarScan(azimuths=azimuths, ranges=ranges,
                     max_range=params.lidar_range, timestamp=state.t)


def column_bearings(params: SensorParams) -> np.ndarray:
    """Body-frame bearing of every image column center, radians.

    Bearings increase with the column index; column ``width/2 - 0.5`` looks
    straight ahead.
    """
    cols = np.arange(params.image_width, dtype=np.float64)
    return np.arctan((cols + 0.5 - params.image_width / 2.0) / params.focal_px)


def column_rays(scenario: Scenario, state: QuadState, params: SensorParams,
                ) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Planar ray cast of every image column.

    Returns ``(bearings, ranges, hit_index)`` where hit_index is -1 for
    columns whose ray reaches the lidar range without touching an obstacle.
    """
    bearings = column_bearings(params)
    ranges, hit_index = cast_rays(scenario, (state.x, state.y),
                                  state.psi + bearings, params.lidar_range)
    return bearings, ranges, hit_index


_MASK32 = np.uint64(0xFFFFFFFF)


@njit(cache=True, inline="always")
def _hash01(ix, iy, seed):
    """Deterministic lattice hash to [0, 1).

    All mixing is done in 64-bit unsigned arithmetic masked back to 32 bits
    at each step, so the result is identical on every platform.
    """
    h = (np.uint64(ix & 0xFFFFFFFF) * np.uint64(374761393)
         + np.uint64(iy & 0xFFFFFFFF) * np.uint64(668265263)
         + np.uint64(seed) * np.uint64(2246822519)) & _MASK32
    h = ((h ^ (h >> np.uint64(13))) * np.uint64(1274126177)) & _MASK32
    h = h ^ (h >> np.uint64(16))
    return float(h) * (1.0 / 4294967296.0)


@njit(cache=True, inline="always")
def _value_noise(u, v, seed):
    """Smooth value noise on a unit lattice, range [0, 1)."""
    iu = math.floor(u)
    iv = math.floor(v)
    fu = u - iu
    fv = v - iv
    su = fu * fu * (3.0 - 2.0 * fu)
    sv = fv * fv * (3.0 - 2.0 * fv)
    i = np.int64(iu)
    j = np.int64(iv)
    a = _hash01(i, j, seed)
    b = _hash01(i + 1, j, seed)
    c = _hash01(i, j + 1, seed)
    d = _hash01(i + 1, j + 1, seed)
    return (a * (1.0 - su) + b * su) * (1.0 - sv) + (c * (1.0 - su) + d * su) * sv


@njit(cache=True)
def _shade_hit_columns(img, cols, surf_s, row_drop, tile_px, cam_z, cy, seed):
    """Fill obstacle columns with a world-anchored checker plus value noise.

    ``row_drop[n]`` converts a row offset from the horizon into a world
    height drop at the hit distance of column ``cols[n]``. The checker
    contrast fades out once a projected tile falls under about two pixels,
    which removes aliasing flicker on distant surfaces the same way a
    mip-mapped texture would.
    """
    height = img.shape[0]
    for n in range(cols.size):
        col = cols[n]
        s = surf_s[n]
        q = row_drop[n]
        fade = (tile_px[n] - 1.5) / 2.5
        if fade < 0.0:
            fade = 0.0
        elif fade > 1.0:
            fade = 1.0
        u_checker = np.int64(math.floor(s / _TILE))
        u_noise = s / _NOISE_CELL
        for row in range(height):
            z = cam_z - ((row + 0.5) - cy) * q
            noise = _value_noise(u_noise, z / _NOISE_CELL, seed)
            if ((u_checker + np.int64(math.floor(z / _TILE))) & 1) == 0:
                checker = 1.0
            else:
                checker = -1.0
            val = 118.0 + fade * (40.0 + 35.0 * noise) * checker + 42.0 * (noise - 0.5)
            if val < 0.0:
                val = 0.0
            elif val > 255.0:
                val = 255.0
            img[row, col] = np.uint8(int(val + 0.5))
    return img


def _surface_coordinates(scenario: Scenario, origin: tuple[float, float],
                         azimuths: np.ndarray, ranges: np.ndarray,
                         hit_index: np.ndarray) -> np.ndarray:
    """World-anchored horizontal surface coordinate of each hit point.

    Circles use arc length from the circle's +x axis; boxes use perimeter
    arc length counterclockwise from the min corner. Both are static in the
    world, so the texture sticks to surfaces while the camera moves.
    """
    out = np.zeros(ranges.shape[0])
    hits = np.nonzero(hit_index >= 0)[0]
    if hits.size == 0:
        return out
    px = origin[0] + ranges[hits] * np.cos(azimuths[hits])
    py = origin[1] + ranges[hits] * np.sin(azimuths[hits])
    for k, i in enumerate(hits):
        ob = scenario.obstacles[hit_index[i]]
        x, y = px[k], py[k]
        if isinstance(ob, Circle):
            theta = math.atan2(y - ob.center[1], x - ob.center[0])
            out[i] = ob.radius * theta
        else:
            x0, y0 = ob.min_corner
            x1, y1 = ob.max_corner
            w, h = x1 - x0, y1 - y0
            # Perimeter coordinate: bottom, right, top, then left face.
            dists = (abs(y - y0), abs(x - x1), abs(y - y1), abs(x - x0))
            face = dists.index(min(dists))
            if face == 0:
                out[i] = x - x0
            elif face == 1:
                out[i] = w + (y - y0)
            elif face == 2:
                out[i] = w + h + (x1 - x)
            else:
                out[i] = 2 * w + h + (y1 - y)
    return out


def render_frame(scenario: Scenario, state: QuadState,
                 params: SensorParams) -> ImageFrame:
    """Render the monocular view from the current state.

    Deterministic in (scenario, state): the texture is procedural and
    anchored to world coordinates, so repeated calls are bit-identical.
    """
    width, height = params.image_width, params.image_height
    cy = height / 2.0
    bearings, ranges, hit_index = column_rays(scenario, state, params)
    img = np.empty((height, width), dtype=np.uint8)

    miss = hit_index < 0
    rows = np.arange(height, dtype=np.float64) + 0.5
    sky = 205.0 - 40.0 * (rows / cy)
    ground = 95.0 - 40.0 * ((rows - cy) / (height - cy))
    template = np.where(rows < cy, sky, ground)
    img[:, miss] = np.uint8(template + 0.5)[:, None]

    hit_cols = np.nonzero(~miss)[0]
    if hit_cols.size:
        azimuths = state.psi + bearings
        surf = _surface_coordinates(scenario, (state.x, state.y), azimuths,
                                    ranges, hit_index)
        # Height drop per pixel row equals depth along the optical axis
        # divided by the focal length (square pixels: fy == fx).
        depth = ranges * np.cos(bearings)
        row_drop = depth / params.focal_px
        with np.errstate(divide="ignore"):
            tile_px = params.focal_px * _TILE / ranges
        _shade_hit_columns(img, hit_cols.astype(np.int64), surf[hit_cols],
                           row_drop[hit_cols], tile_px[hit_cols],
                           float(state.z), cy, np.int64(scenario.seed))
    return ImageFrame(width=width, height=height, pixels=img, timestamp=state.t)


def write_pgm(frame: ImageFrame, path) -> None:
    """Write a frame as a binary PGM (P5, maxval 255)."""
    header = f"P5\n{frame.width} {frame.height}\n255\n".encode("ascii")
    with open(path, "wb") as fh:
        fh.write(header)
        fh.write(frame.pixels.tobytes())

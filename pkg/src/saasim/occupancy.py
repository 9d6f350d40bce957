"""Sector occupancy maps: normalized per-sector evidence from optical flow
and lidar depth, their weighted fusion, and desired-sector selection.

Sectors split the camera's horizontal field of view into ``sectors`` equal
angular bins indexed 1..M from the most negative bearing to the most
positive. The median sector (M + 1) / 2 faces straight ahead. Functions
here take and return 1-based sector indices; the underlying numpy arrays
are 0-based internally.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .config import FoamParams
from .sensors import LidarScan
from .vision import FlowTrack

__all__ = [
    "FoamParams", "SectorPom", "sector_of_column", "sector_of_bearing",
    "camera_pom", "lidar_pom", "fuse", "min_yaw_cost",
]


@dataclass(frozen=True)
class SectorPom:
    """Per-sector occupancy values.

    Each value lies in [0, 1] and, because both occupancy normalizations
    divide by epsilon plus the total evidence, the values sum to strictly
    less than 1.
    """

    values: np.ndarray

    def __post_init__(self) -> None:
        values = np.asarray(self.values, dtype=np.float64)
        if values.ndim != 1 or values.size < 1:
            raise ValueError(f"sector values must be a 1-D vector, got shape {values.shape}")
        if not ((values >= 0.0).all() and (values <= 1.0).all()):
            raise ValueError("sector values must lie in [0, 1]")
        if not values.sum() < 1.0:
            raise ValueError("sector values must sum to strictly less than 1")
        values.setflags(write=False)
        object.__setattr__(self, "values", values)

    def __len__(self) -> int:
        return self.values.size

    def value(self, sector: int) -> float:
        """Occupancy of a 1-based sector index."""
        return float(self.values[sector - 1])


def sector_of_column(column: float, image_width: int, sectors: int) -> int:
    """Sector of an image column; columns map left to right onto 1..M."""
    if not 0 <= column < image_width:
        raise ValueError(f"column {column} outside image of width {image_width}")
    return int(math.floor(column * sectors / image_width)) + 1


def sector_of_bearing(bearing: float, hfov: float, sectors: int) -> int | None:
    """Sector of a body-frame bearing, or None outside the field of view.

    The field of view spans [-hfov/2, +hfov/2]; both boundary bearings are
    treated as inside and the +hfov/2 edge belongs to sector M.
    """
    half = hfov / 2.0
    if not -half <= bearing <= half:
        return None
    index = int(math.floor((bearing + half) * sectors / hfov)) + 1
    return min(index, sectors)


def camera_pom(tracks: list[FlowTrack], image_width: int,
               params: FoamParams) -> SectorPom:
    """Optical-flow occupancy: per-sector flow magnitude over total flow.

    Only valid tracks may be passed; each contributes its magnitude to the
    sector of its final image column. Values are normalized by epsilon plus
    the total magnitude of all passed tracks, so faster apparent motion in a
    sector reads as higher occupancy. No tracks yields all zeros.
    """
    sums = np.zeros(params.sectors)
    total = 0.0
    for track in tracks:
        sector = sector_of_column(track.sector_column, image_width, params.sectors)
        sums[sector - 1] += track.magnitude
        total += track.magnitude
    return SectorPom(sums / (params.epsilon + total))


def lidar_pom(scan: LidarScan, hfov: float, params: FoamParams) -> SectorPom:
    """Depth occupancy: per-sector nearness mass over total nearness.

    Scan points with bearings inside the field of view contribute
    ``max_depth - range`` (clamped at zero for returns at or beyond the
    effective depth) to their bearing's sector. Values are normalized by
    epsilon plus the total contribution, so nearer returns read as higher
    occupancy. An empty or out-of-view scan yields all zeros.
    """
    half = hfov / 2.0
    bearings = np.asarray(scan.azimuths, dtype=np.float64)
    ranges = np.asarray(scan.ranges, dtype=np.float64)
    inside = (bearings >= -half) & (bearings <= half)
    mass = np.maximum(params.max_depth - ranges[inside], 0.0)
    index = np.floor((bearings[inside] + half) * params.sectors / hfov).astype(np.int64)
    index = np.minimum(index, params.sectors - 1)
    sums = np.bincount(index, weights=mass, minlength=params.sectors)
    return SectorPom(sums / (params.epsilon + mass.sum()))


def fuse(camera: SectorPom, lidar: SectorPom, params: FoamParams) -> SectorPom:
    """Convex combination of the two occupancy maps, sector by sector."""
    if len(camera) != len(lidar):
        raise ValueError(f"sector counts differ: {len(camera)} vs {len(lidar)}")
    return SectorPom(params.camera_weight * camera.values
                     + params.lidar_weight * lidar.values)


def min_yaw_cost(pom: SectorPom) -> int:
    """1-based index of the least occupied sector.

    Ties prefer the sector closest to the median (straight ahead); remaining
    ties prefer the smaller index. The selection is a pure lexicographic
    minimum, so it is total and deterministic.
    """
    sectors = len(pom)
    median = (sectors + 1) // 2
    return min(range(1, sectors + 1),
               key=lambda s: (pom.values[s - 1], abs(s - median), s))

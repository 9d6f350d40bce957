"""Parameter dataclasses shared across the sensing, perception and control modules.

All angles are radians and all lengths are meters. Scenario files store angles
in degrees; the parser converts on the way in (see :mod:`saasim.world`).
"""

from __future__ import annotations

import math
from dataclasses import dataclass


class ConfigError(ValueError):
    """A parameter value violates a documented constraint."""


def _require(cond: bool, message: str) -> None:
    if not cond:
        raise ConfigError(message)


@dataclass(frozen=True)
class SensorParams:
    """Simulated sensor suite configuration.

    Attributes:
        lidar_beams: number of evenly spaced planar lidar beams per scan.
        lidar_range: maximum lidar range in meters; misses read this value.
        lidar_rate: lidar refresh rate in Hz (held between refreshes).
        camera_hfov: horizontal field of view of the camera in radians.
        camera_rate: camera frame rate in Hz; also the control rate.
        image_width: rendered image width in pixels.
        image_height: rendered image height in pixels.
    """

    lidar_beams: int = 360
    lidar_range: float = 40.0
    lidar_rate: float = 10.0
    camera_hfov: float = math.pi / 2
    camera_rate: float = 30.0
    image_width: int = 640
    image_height: int = 480

    def __post_init__(self) -> None:
        _require(self.lidar_beams >= 1, f"lidar_beams must be >= 1, got {self.lidar_beams}")
        _require(self.lidar_range > 0, f"lidar_range must be positive, got {self.lidar_range}")
        _require(self.lidar_rate > 0, f"lidar_rate must be positive, got {self.lidar_rate}")
        _require(0 < self.camera_hfov < math.pi,
                 f"camera_hfov must lie in (0, pi) radians, got {self.camera_hfov}")
        _require(self.camera_rate > 0, f"camera_rate must be positive, got {self.camera_rate}")
        _require(self.image_width >= 32 and self.image_height >= 32,
                 f"image dimensions must be >= 32 px, got "
                 f"{self.image_width}x{self.image_height}")

    @property
    def focal_px(self) -> float:
        """Pinhole focal length in pixels implied by width and field of view."""
        return (self.image_width / 2.0) / math.tan(self.camera_hfov / 2.0)


@dataclass(frozen=True)
class FoamParams:
    """Sector occupancy and yaw selection parameters (the `foam` scenario section).

    Attributes:
        sectors: number of angular sectors across the camera field of view.
            Must be odd so a single median sector faces straight ahead.
        camera_weight: fusion weight of the optical-flow occupancy map.
        lidar_weight: fusion weight of the lidar occupancy map. The two
            weights must sum to 1 so fused values stay valid probabilities.
        epsilon: small positive regularizer in the occupancy normalizations.
        max_depth: effective lidar depth in meters; returns at or beyond it
            contribute zero occupancy.
        yaw_step: yaw offset per sector away from the median, radians.
        free_threshold: occupancy at or below this value counts as free.
    """

    sectors: int = 9
    camera_weight: float = 0.5
    lidar_weight: float = 0.5
    epsilon: float = 1e-6
    max_depth: float = 10.0
    yaw_step: float = math.radians(10.0)
    free_threshold: float = 0.05

    def __post_init__(self) -> None:
        _require(self.sectors >= 3, f"sector count must be >= 3, got {self.sectors}")
        _require(self.sectors % 2 == 1, f"sector count must be odd, got {self.sectors}")
        _require(self.camera_weight >= 0 and self.lidar_weight >= 0,
                 "fusion weights must be nonnegative")
        _require(abs(self.camera_weight + self.lidar_weight - 1.0) <= 1e-9,
                 f"camera_weight + lidar_weight must sum to 1, got "
                 f"{self.camera_weight + self.lidar_weight}")
        _require(self.epsilon > 0, f"epsilon must be positive, got {self.epsilon}")
        _require(self.max_depth > 0, f"max_depth must be positive, got {self.max_depth}")
        _require(self.yaw_step > 0, f"yaw_step must be positive, got {self.yaw_step}")
        _require(0 <= self.free_threshold <= 1,
                 f"free_threshold must lie in [0, 1], got {self.free_threshold}")

    @property
    def median_sector(self) -> int:
        """1-based index of the straight-ahead sector."""
        return (self.sectors + 1) // 2


@dataclass(frozen=True)
class VisionParams:
    """Corner detection and pyramidal flow tracking parameters.

    Attributes:
        pyramid_levels: number of pyramid levels used by the tracker.
        lk_window: odd side length of the square tracking window, pixels.
        lk_max_iterations: iteration cap of the per-level refinement.
        lk_epsilon: stop once the refinement step norm falls below this.
        quality_level: corner acceptance threshold as a fraction of the
            strongest corner response in the frame.
        max_corners: cap on the number of detected corners per frame.
        min_corner_distance: minimum Euclidean spacing between accepted
            corners, pixels.
    """

    pyramid_levels: int = 3
    lk_window: int = 15
    lk_max_iterations: int = 20
    lk_epsilon: float = 0.01
    quality_level: float = 0.01
    max_corners: int = 400
    min_corner_distance: float = 8.0

    def __post_init__(self) -> None:
        _require(self.pyramid_levels >= 1,
                 f"pyramid_levels must be >= 1, got {self.pyramid_levels}")
        _require(self.lk_window >= 3 and self.lk_window % 2 == 1,
                 f"lk_window must be an odd integer >= 3, got {self.lk_window}")
        _require(self.lk_max_iterations >= 1,
                 f"lk_max_iterations must be >= 1, got {self.lk_max_iterations}")
        _require(self.lk_epsilon > 0, f"lk_epsilon must be positive, got {self.lk_epsilon}")
        _require(0 < self.quality_level <= 1,
                 f"quality_level must lie in (0, 1], got {self.quality_level}")
        _require(self.max_corners >= 1, f"max_corners must be >= 1, got {self.max_corners}")
        _require(self.min_corner_distance >= 1,
                 f"min_corner_distance must be >= 1 px, got {self.min_corner_distance}")


@dataclass(frozen=True)
class SimConfig:
    """Closed-loop integration configuration (the `sim` scenario section).

    Attributes:
        dt: control step in seconds. ``None`` means one camera frame period.
        yaw_rate_limit: maximum heading rate in rad/s used when tracking the
            commanded yaw setpoint.
        goal_tolerance: distance in meters at which the goal counts reached.
    """

    dt: float | None = None
    yaw_rate_limit: float = math.radians(90.0)
    goal_tolerance: float = 1.0

    def __post_init__(self) -> None:
        if self.dt is not None:
            _require(self.dt > 0, f"dt must be positive, got {self.dt}")
        _require(self.yaw_rate_limit > 0,
                 f"yaw_rate_limit must be positive, got {self.yaw_rate_limit}")
        _require(self.goal_tolerance > 0,
                 f"goal_tolerance must be positive, got {self.goal_tolerance}")

    def step_seconds(self, sensor: SensorParams) -> float:
        """Resolve the control step, defaulting to the camera frame period."""
        return self.dt if self.dt is not None else 1.0 / sensor.camera_rate

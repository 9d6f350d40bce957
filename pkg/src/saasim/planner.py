"""Sector-selection steering: seek the goal while its sector is free,
otherwise swing toward the least occupied sector.

The planner outputs a yaw setpoint at constant speed and height; the
closed-loop integrator applies a rate limit when tracking it.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .config import FoamParams
from .occupancy import SectorPom, min_yaw_cost, sector_of_bearing
from .world import QuadState, wrap_angle


@dataclass(frozen=True)
class Command:
    """Control output: absolute yaw setpoint, forward speed and height."""

    yaw_setpoint: float
    forward_speed: float
    height: float


def goal_bearing(state: QuadState, goal: tuple[float, float]) -> float:
    """Bearing from the current heading to the goal, wrapped to (-pi, pi].

    Defined as zero when the vehicle stands exactly on the goal.
    """
    dx = goal[0] - state.x
    dy = goal[1] - state.y
    if dx == 0.0 and dy == 0.0:
        return 0.0
    return wrap_angle(math.atan2(dy, dx) - state.psi)


def yaw_from_sector(current_yaw: float, sector: int, params: FoamParams) -> float:
    """Absolute yaw setpoint that rotates toward a sector.

    The offset is ``yaw_step`` per sector of distance from the median, so
    the median sector commands the current heading unchanged.
    """
    if not 1 <= sector <= params.sectors:
        raise ValueError(f"sector {sector} outside 1..{params.sectors}")
    return wrap_angle(current_yaw + params.yaw_step * (sector - params.median_sector))


def goal_reached(state: QuadState, goal: tuple[float, float],
                 tolerance: float) -> bool:
    """True once the planar distance to the goal is within tolerance."""
    if tolerance <= 0:
        raise ValueError(f"tolerance must be positive, got {tolerance}")
    return math.hypot(goal[0] - state.x, goal[1] - state.y) <= tolerance


def plan(state: QuadState, fused: SectorPom, camera_available: bool,
         goal: tuple[float, float], params: FoamParams, hfov: float,
         cruise_speed: float, height: float) -> Command:
    """One steering decision from the fused occupancy map.

    When the goal's bearing falls inside the field of view and its sector is
    free (occupancy at or below ``free_threshold``), steer straight at the
    goal. When the goal is outside the field of view and the straight-ahead
    sector is free, swing toward the goal side at the edge of the field of
    view. Otherwise rotate toward the least occupied sector.

    ``camera_available`` only documents whether the fused map includes
    optical flow; the decision rule is the same either way.
    """
    del camera_available
    bearing = goal_bearing(state, goal)
    half = hfov / 2.0
    sector = sector_of_bearing(bearing, hfov, params.sectors)
    if sector is not None:
        if fused.value(sector) <= params.free_threshold:
            yaw = wrap_angle(state.psi + bearing)
        else:
            yaw = yaw_from_sector(state.psi, min_yaw_cost(fused), params)
    else:
        if fused.value(params.median_sector) <= params.free_threshold:
            yaw = wrap_angle(state.psi + math.copysign(half, bearing))
        else:
            yaw = yaw_from_sector(state.psi, min_yaw_cost(fused), params)
    return Command(yaw_setpoint=yaw, forward_speed=cruise_speed, height=height)

"""Deterministic desk-scale sense-and-avoid simulation.

A simulated planar lidar and a rendered monocular camera feed a perception
stack (sparse optical flow plus depth) that fills per-sector occupancy
maps; a sector-selection planner steers a kinematic vehicle toward its
goal around obstacles, closing the loop at the camera rate.
"""

from .config import FoamParams, SensorParams, SimConfig, VisionParams
from .mission import (MissionResult, MissionStatus, TraceRow, read_trace,
                      run_mission, step_kinematics, summarize, write_trace)
from .occupancy import (SectorPom, camera_pom, fuse, lidar_pom, min_yaw_cost,
                        sector_of_bearing, sector_of_column)
from .planner import Command, goal_bearing, goal_reached, plan, yaw_from_sector
from .sensors import ImageFrame, LidarScan, render_frame, simulate_lidar, write_pgm
from .vision import (Corner, FeatureTracker, FlowTrack, build_pyramid,
                     detect_corners, grayscale, lk_track, min_eigenvalue_map,
                     track_three_frames)
from .world import (Box, Circle, QuadState, Scenario, ScenarioError,
                    cross_track_deviation, is_collision, load_scenario,
                    min_clearance, parse_scenario, ray_cast, wrap_angle)

__version__ = "0.1.0"

__all__ = [
    "Box", "Circle", "Command", "Corner", "FeatureTracker", "FlowTrack",
    "FoamParams", "ImageFrame", "LidarScan", "MissionResult", "MissionStatus",
    "QuadState", "Scenario", "ScenarioError", "SectorPom", "SensorParams",
    "SimConfig", "TraceRow", "VisionParams", "build_pyramid", "camera_pom",
    "cross_track_deviation", "detect_corners", "fuse", "goal_bearing",
    "goal_reached", "grayscale", "is_collision", "lidar_pom", "lk_track",
    "load_scenario", "min_clearance", "min_eigenvalue_map", "min_yaw_cost",
    "parse_scenario", "plan", "ray_cast", "read_trace", "render_frame",
    "run_mission", "sector_of_bearing", "sector_of_column", "simulate_lidar",
    "step_kinematics", "summarize", "track_three_frames", "wrap_angle",
    "write_pgm", "write_trace", "yaw_from_sector",
]

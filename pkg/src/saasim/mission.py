"""Closed-loop mission integration: render, sense, fuse, steer, step.

The loop runs at the camera rate. Each tick renders a frame, refreshes the
lidar on its own slower schedule (holding the last scan in between), runs
the perception stack, plans a yaw setpoint and advances the kinematic
vehicle. Perception wall-clock time is measured with a monotonic clock and
recorded per tick; it is the only nondeterministic column of a trace.

Trace rows record the state after each step together with the decision
that produced it, so a terminating row exhibits the condition that ended
the mission (goal distance within tolerance, clearance below the vehicle
radius, or time beyond the limit).
"""

from __future__ import annotations

import enum
import itertools
import math
import time
from dataclasses import dataclass

import numpy as np

from .config import SimConfig
from .occupancy import camera_pom, fuse, lidar_pom, min_yaw_cost
from .planner import goal_reached, plan
from .sensors import render_frame, simulate_lidar
from .vision import FeatureTracker, grayscale
from .world import (QuadState, Scenario, cross_track_deviation, is_collision,
                    min_clearance, parse_scenario, wrap_angle)


class MissionStatus(enum.Enum):
    SUCCESS = "success"
    COLLISION = "collision"
    TIMEOUT = "timeout"


@dataclass(frozen=True)
class TraceRow:
    """One control tick: post-step state, the decision behind it, and
    derived safety metrics."""

    t: float
    x: float
    y: float
    psi: float
    yaw_setpoint: float
    s_d: int
    pom: tuple[float, ...]
    min_clearance: float
    cross_track: float
    latency_s: float


@dataclass(frozen=True)
class MissionResult:
    """Mission outcome and summary metrics over the trace."""

    status: MissionStatus
    duration: float
    path_length: float
    max_cross_track: float
    mean_cross_track: float
    min_clearance: float
    mean_latency_s: float
    p95_latency_s: float
    ticks: int


def step_kinematics(state: QuadState, command, dt: float,
                    yaw_rate_limit: float) -> QuadState:
    """Advance the vehicle one step at constant speed and height.

    The heading rotates toward the setpoint along the shorter direction at
    no more than ``yaw_rate_limit`` radians per second; the position then
    integrates the updated heading.
    """
    if dt <= 0:
        raise ValueError(f"dt must be positive, got {dt}")
    error = wrap_angle(command.yaw_setpoint - state.psi)
    max_step = yaw_rate_limit * dt
    delta = min(max(error, -max_step), max_step)
    psi = wrap_angle(state.psi + delta)
    speed = command.forward_speed
    return QuadState(x=state.x + speed * math.cos(psi) * dt,
                     y=state.y + speed * math.sin(psi) * dt,
                     z=command.height, psi=psi, v=speed, t=state.t + dt)


def run_mission(scenario: Scenario, config: SimConfig | None = None,
                frame_sink=None) -> tuple[MissionResult, list[TraceRow]]:
    """Fly a scenario to termination.

    Args:
        scenario: validated scenario to fly.
        config: loop configuration; defaults to the scenario's ``sim``
            section.
        frame_sink: optional callable ``(tick, frame)`` invoked with every
            rendered frame before perception, used for frame dumps.

    Returns:
        The mission result and the full trace, one row per control tick.
    """
    if config is None:
        config = scenario.sim
    sensor, foam = scenario.sensor, scenario.foam
    dt = config.step_seconds(sensor)
    lidar_every = max(1, round((1.0 / sensor.lidar_rate) / dt))
    tracker = FeatureTracker(scenario.vision)
    state = QuadState(x=scenario.start[0], y=scenario.start[1],
                      z=scenario.height, psi=scenario.start_heading,
                      v=scenario.cruise_speed, t=0.0)
    if is_collision(scenario, state):
        raise ValueError("start position is in collision with an obstacle")

    rows: list[TraceRow] = []
    scan = None
    status = None
    for tick in itertools.count():
        frame = render_frame(scenario, state, sensor)
        if frame_sink is not None:
            frame_sink(tick, frame)
        if tick % lidar_every == 0:
            scan = simulate_lidar(scenario, state, sensor)

        started = time.perf_counter()
        tracker.push(frame)
        tracks = tracker.tracks()
        lidar_map = lidar_pom(scan, sensor.camera_hfov, foam)
        if tracks is None:
            fused = lidar_map
        else:
            camera_map = camera_pom([t for t in tracks if t.valid],
                                    sensor.image_width, foam)
            fused = fuse(camera_map, lidar_map, foam)
        desired = min_yaw_cost(fused)
        command = plan(state, fused, tracks is not None, scenario.goal, foam,
                       sensor.camera_hfov, scenario.cruise_speed, scenario.height)
        latency = time.perf_counter() - started

        state = step_kinematics(state, command, dt, config.yaw_rate_limit)
        rows.append(TraceRow(
            t=state.t, x=state.x, y=state.y, psi=state.psi,
            yaw_setpoint=command.yaw_setpoint, s_d=desired,
            pom=tuple(float(v) for v in fused.values),
            min_clearance=min_clearance(scenario, (state.x, state.y)),
            cross_track=cross_track_deviation(scenario.start, scenario.goal,
                                              (state.x, state.y)),
            latency_s=latency))
        if goal_reached(state, scenario.goal, config.goal_tolerance):
            status = MissionStatus.SUCCESS
            break
        if is_collision(scenario, state):
            status = MissionStatus.COLLISION
            break
        if state.t > scenario.t_max:
            status = MissionStatus.TIMEOUT
            break
    return _result(status, rows, scenario), rows


def summarize(trace: list[TraceRow], scenario: Scenario) -> dict:
    """Summary metrics of a trace: duration, path length, cross-track
    statistics, clearance minimum and perception latency statistics.

    Latency statistics cover the rows where optical flow was active, which
    starts once four frames have been buffered (the fourth row); shorter
    traces fall back to all rows. Deterministic given the trace.
    """
    if not trace:
        raise ValueError("cannot summarize an empty trace")
    xs = np.array([(r.x, r.y) for r in trace])
    hops = np.vstack((np.asarray(scenario.start, dtype=np.float64)[None, :], xs))
    path_length = float(np.hypot(np.diff(hops[:, 0]), np.diff(hops[:, 1])).sum())
    cross = np.array([r.cross_track for r in trace])
    latencies = np.array([r.latency_s for r in trace])
    if latencies.size > 3:
        latencies = latencies[3:]
    return {
        "duration": float(trace[-1].t),
        "path_length": path_length,
        "max_cross_track": float(cross.max()),
        "mean_cross_track": float(cross.mean()),
        "min_clearance": float(min(r.min_clearance for r in trace)),
        "mean_latency_s": float(latencies.mean()),
        "p95_latency_s": float(np.percentile(latencies, 95)),
        "ticks": len(trace),
    }


def _result(status: MissionStatus, rows: list[TraceRow],
            scenario: Scenario) -> MissionResult:
    metrics = summarize(rows, scenario)
    return MissionResult(status=status, **metrics)


def trace_header(sectors: int) -> str:
    pom_cols = ",".join(f"P_{i}" for i in range(1, sectors + 1))
    return f"t,x,y,psi,yaw_setpoint,s_d,{pom_cols},min_clearance,cross_track,latency_s"


def _fmt(value: float) -> str:
    return f"{value:.9g}"


def write_trace(path, trace: list[TraceRow]) -> None:
    """Write a trace as CSV with 9-significant-digit floats."""
    if not trace:
        raise ValueError("cannot write an empty trace")
    sectors = len(trace[0].pom)
    lines = [trace_header(sectors)]
    for r in trace:
        fields = [_fmt(r.t), _fmt(r.x), _fmt(r.y), _fmt(r.psi),
                  _fmt(r.yaw_setpoint), str(r.s_d)]
        fields.extend(_fmt(v) for v in r.pom)
        fields.extend((_fmt(r.min_clearance), _fmt(r.cross_track),
                       _fmt(r.latency_s)))
        lines.append(",".join(fields))
    with open(path, "w", encoding="ascii", newline="\n") as fh:
        fh.write("\n".join(lines) + "\n")


def benchmark_scenario() -> Scenario:
    """A densely textured scene for perception load measurement.

    Walls flank the corridor and staggered poles sit 5 to 14 meters ahead,
    so the camera sees obstacle texture across most of its field of view
    and the corner detector runs at its cap.
    """
    return parse_scenario({
        "bounds": [[-5.0, -8.0], [45.0, 8.0]],
        "obstacles": [
            {"type": "box", "min": [3.0, 4.5], "max": [20.0, 6.0]},
            {"type": "box", "min": [3.0, -6.0], "max": [20.0, -4.5]},
            {"type": "circle", "center": [6.0, 1.5], "radius": 0.6},
            {"type": "circle", "center": [9.0, -1.8], "radius": 0.7},
            {"type": "circle", "center": [12.0, 2.2], "radius": 0.6},
            {"type": "circle", "center": [14.0, -0.8], "radius": 0.7},
        ],
        "start": [0.0, 0.0, 0.0],
        "goal": [40.0, 0.0],
        "cruise_speed": 4.5,
        "t_max": 30.0,
    })


def benchmark_perception(scenario: Scenario | None = None, ticks: int = 60,
                         warmup: int = 8) -> list[float]:
    """Measure the perception-and-planning wall clock per control tick.

    Each tick times the full decision path on a fabricated three-channel
    camera output: grayscale conversion, pyramid build, corner detection,
    the three tracking steps, both occupancy maps, fusion and the steering
    decision. Rendering and lidar simulation stand in for hardware and are
    excluded. The first ``warmup`` ticks (buffer fill plus compilation
    warm-up) are discarded; the remaining ``ticks`` samples are returned in
    seconds.
    """
    if scenario is None:
        scenario = benchmark_scenario()
    sensor, foam = scenario.sensor, scenario.foam
    config = scenario.sim
    dt = config.step_seconds(sensor)
    lidar_every = max(1, round((1.0 / sensor.lidar_rate) / dt))
    tracker = FeatureTracker(scenario.vision)
    state = QuadState(x=scenario.start[0], y=scenario.start[1],
                      z=scenario.height, psi=scenario.start_heading,
                      v=scenario.cruise_speed, t=0.0)
    scan = None
    samples: list[float] = []
    for tick in range(warmup + ticks):
        frame = render_frame(scenario, state, sensor)
        rgb = np.stack([frame.pixels] * 3, axis=-1)
        if tick % lidar_every == 0:
            scan = simulate_lidar(scenario, state, sensor)

        started = time.perf_counter()
        gray = grayscale(rgb, frame.timestamp)
        tracker.push(gray)
        tracks = tracker.tracks()
        lidar_map = lidar_pom(scan, sensor.camera_hfov, foam)
        if tracks is None:
            fused = lidar_map
        else:
            camera_map = camera_pom([t for t in tracks if t.valid],
                                    sensor.image_width, foam)
            fused = fuse(camera_map, lidar_map, foam)
        command = plan(state, fused, tracks is not None, scenario.goal, foam,
                       sensor.camera_hfov, scenario.cruise_speed,
                       scenario.height)
        elapsed = time.perf_counter() - started

        if tick >= warmup:
            samples.append(elapsed)
        state = step_kinematics(state, command, dt, config.yaw_rate_limit)
    return samples


def read_trace(path) -> list[TraceRow]:
    """Parse a trace CSV written by :func:`write_trace`."""
    with open(path, "r", encoding="ascii") as fh:
        lines = [line.strip() for line in fh if line.strip()]
    if not lines:
        raise ValueError(f"trace file {path} is empty")
    header = lines[0].split(",")
    expected_prefix = ["t", "x", "y", "psi", "yaw_setpoint", "s_d"]
    if header[:6] != expected_prefix or header[-3:] != ["min_clearance",
                                                        "cross_track", "latency_s"]:
        raise ValueError(f"unrecognized trace header in {path}")
    sectors = len(header) - 9
    if sectors < 1 or header[6] != "P_1" or header[5 + sectors] != f"P_{sectors}":
        raise ValueError(f"unrecognized occupancy columns in {path}")
    rows = []
    for line in lines[1:]:
        parts = line.split(",")
        if len(parts) != len(header):
            raise ValueError(f"trace row has {len(parts)} fields, expected {len(header)}")
        rows.append(TraceRow(
            t=float(parts[0]), x=float(parts[1]), y=float(parts[2]),
            psi=float(parts[3]), yaw_setpoint=float(parts[4]),
            s_d=int(parts[5]),
            pom=tuple(float(v) for v in parts[6:6 + sectors]),
            min_clearance=float(parts[6 + sectors]),
            cross_track=float(parts[7 + sectors]),
            latency_s=float(parts[8 + sectors])))
    return rows

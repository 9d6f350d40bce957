"""Planar world model: obstacles, ray casting, clearance metrics and the
scenario document format.

Conventions used throughout the package:

* Lengths are meters, angles are radians, headings are measured from the +x
  axis toward +y and wrapped to ``(-pi, pi]``.
* Positive bearings point toward the +y side of the current heading. Sector
  indices and image columns both increase in that direction.
* Scenario files store angles in degrees; parsing converts to radians.
* The world is two dimensional. Obstacles span all heights, so planar
  clearance is the only collision quantity.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Union

import numpy as np

from .config import ConfigError, FoamParams, SensorParams, SimConfig, VisionParams


class ScenarioError(ValueError):
    """A scenario document is malformed or violates a validation rule."""


def wrap_angle(angle: float) -> float:
    """Wrap an angle to the half-open interval ``(-pi, pi]``.

    Angles already inside the interval are returned unchanged (bit-exact),
    which keeps straight-ahead steering setpoints equal to the current
    heading rather than merely close to it.
    """
    if -math.pi < angle <= math.pi:
        return angle
    wrapped = (angle + math.pi) % (2.0 * math.pi) - math.pi
    return math.pi if wrapped == -math.pi else wrapped


@dataclass(frozen=True)
class Circle:
    """Disc obstacle (a pole or tree trunk seen from above)."""

    center: tuple[float, float]
    radius: float

    def __post_init__(self) -> None:
        if not self.radius > 0:
            raise ScenarioError(f"circle radius must be positive, got {self.radius}")


@dataclass(frozen=True)
class Box:
    """Axis-aligned rectangle, used both for obstacles and for world bounds."""

    min_corner: tuple[float, float]
    max_corner: tuple[float, float]

    def __post_init__(self) -> None:
        if not (self.min_corner[0] < self.max_corner[0]
                and self.min_corner[1] < self.max_corner[1]):
            raise ScenarioError(
                f"box corners must be strictly ordered, got {self.min_corner} "
                f"and {self.max_corner}")

    def contains(self, point: tuple[float, float]) -> bool:
        return (self.min_corner[0] <= point[0] <= self.max_corner[0]
                and self.min_corner[1] <= point[1] <= self.max_corner[1])


Obstacle = Union[Circle, Box]


@dataclass(frozen=True)
class QuadState:
    """Vehicle state: planar position, height, heading, speed and time."""

    x: float
    y: float
    z: float
    psi: float
    v: float
    t: float


@dataclass
class Scenario:
    """A fully validated mission description.

    Instances are treated as immutable after construction; the cached
    obstacle arrays back the vectorized ray casting and clearance queries.
    """

    bounds: Box
    obstacles: tuple[Obstacle, ...]
    start: tuple[float, float]
    start_heading: float
    goal: tuple[float, float]
    cruise_speed: float
    height: float
    t_max: float
    quad_radius: float
    sensor: SensorParams
    foam: FoamParams
    vision: VisionParams
    sim: SimConfig
    seed: int
    _circles: np.ndarray = field(init=False, repr=False, compare=False)
    _boxes: np.ndarray = field(init=False, repr=False, compare=False)
    _id_map: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self) -> None:
        circles = [(c.center[0], c.center[1], c.radius)
                   for c in self.obstacles if isinstance(c, Circle)]
        boxes = [(b.min_corner[0], b.min_corner[1], b.max_corner[0], b.max_corner[1])
                 for b in self.obstacles if isinstance(b, Box)]
        self._circles = np.array(circles, dtype=np.float64).reshape(-1, 3)
        self._boxes = np.array(boxes, dtype=np.float64).reshape(-1, 4)
        circle_ids = [i for i, o in enumerate(self.obstacles) if isinstance(o, Circle)]
        box_ids = [i for i, o in enumerate(self.obstacles) if isinstance(o, Box)]
        self._id_map = np.array(circle_ids + box_ids, dtype=np.int64)


def _signed_distance_many(scenario: Scenario, points: np.ndarray) -> np.ndarray:
    """Signed distance from each point to the nearest obstacle surface.

    Negative inside an obstacle, ``inf`` when the world holds no obstacles.
    ``points`` has shape (N, 2); the result has shape (N,).
    """
    pts = np.asarray(points, dtype=np.float64).reshape(-1, 2)
    n = pts.shape[0]
    best = np.full(n, np.inf)
    circles, boxes = scenario._circles, scenario._boxes
    if circles.shape[0]:
        d = np.hypot(pts[:, 0, None] - circles[None, :, 0],
                     pts[:, 1, None] - circles[None, :, 1]) - circles[None, :, 2]
        best = np.minimum(best, d.min(axis=1))
    if boxes.shape[0]:
        qx = np.maximum(boxes[None, :, 0] - pts[:, 0, None],
                        pts[:, 0, None] - boxes[None, :, 2])
        qy = np.maximum(boxes[None, :, 1] - pts[:, 1, None],
                        pts[:, 1, None] - boxes[None, :, 3])
        outside = np.hypot(np.maximum(qx, 0.0), np.maximum(qy, 0.0))
        inside = np.minimum(np.maximum(qx, qy), 0.0)
        best = np.minimum(best, (outside + inside).min(axis=1))
    return best


def min_clearance(scenario: Scenario, point: tuple[float, float]) -> float:
    """Signed distance from a point to the nearest obstacle surface.

    Positive outside all obstacles, zero on a surface, negative inside one.
    Returns ``math.inf`` for a world without obstacles. Bounds are not
    obstacles and do not contribute.
    """
    return float(_signed_distance_many(scenario, np.array([point]))[0])


def min_clearance_many(scenario: Scenario, points: np.ndarray) -> np.ndarray:
    """Vectorized :func:`min_clearance` over an (N, 2) array of points."""
    return _signed_distance_many(scenario, points)


def is_collision(scenario: Scenario, state: QuadState) -> bool:
    """True when the vehicle disc overlaps an obstacle.

    The test is strict: clearance exactly equal to the vehicle radius is a
    graze and does not count as a collision.
    """
    return min_clearance(scenario, (state.x, state.y)) < scenario.quad_radius


def cast_rays(scenario: Scenario, origin: tuple[float, float],
              azimuths: np.ndarray, max_range: float,
              ) -> tuple[np.ndarray, np.ndarray]:
    """Cast planar rays against every obstacle.

    Args:
        scenario: world holding the obstacles.
        origin: ray origin (shared by all rays).
        azimuths: world-frame ray directions, radians, shape (N,).
        max_range: ranges are clamped to this value; beyond it a ray counts
            as a miss.

    Returns:
        ``(ranges, hit_index)`` where ranges has shape (N,) with values in
        ``[0, max_range]`` and hit_index holds the index into
        ``scenario.obstacles`` of the nearest hit, or -1 for a miss. When the
        origin lies strictly inside an obstacle every range is 0.
    """
    az = np.asarray(azimuths, dtype=np.float64).reshape(-1)
    n = az.shape[0]
    ox, oy = float(origin[0]), float(origin[1])
    circles, boxes = scenario._circles, scenario._boxes
    n_circles = circles.shape[0]
    columns: list[np.ndarray] = []

    if min_clearance(scenario, (ox, oy)) < 0:
        inside = int(np.argmin(_per_obstacle_distance(scenario, ox, oy)))
        return np.zeros(n), np.full(n, inside, dtype=np.int64)

    dx = np.cos(az)
    dy = np.sin(az)

    if n_circles:
        mx = circles[:, 0] - ox
        my = circles[:, 1] - oy
        b = dx[:, None] * mx[None, :] + dy[:, None] * my[None, :]
        c = (mx * mx + my * my) - circles[:, 2] ** 2
        disc = b * b - c[None, :]
        hit = disc >= 0.0
        t = b - np.sqrt(np.where(hit, disc, 0.0))
        columns.append(np.where(hit & (t >= 0.0), t, np.inf))

    if boxes.shape[0]:
        with np.errstate(divide="ignore", invalid="ignore"):
            t_lo_x, t_hi_x = _slab_interval(ox, dx, boxes[:, 0], boxes[:, 2])
            t_lo_y, t_hi_y = _slab_interval(oy, dy, boxes[:, 1], boxes[:, 3])
        t_near = np.maximum(t_lo_x, t_lo_y)
        t_far = np.minimum(t_hi_x, t_hi_y)
        hit = (t_far >= t_near) & (t_far >= 0.0)
        columns.append(np.where(hit, np.maximum(t_near, 0.0), np.inf))

    if not columns:
        return np.full(n, float(max_range)), np.full(n, -1, dtype=np.int64)

    all_t = np.concatenate(columns, axis=1)
    slot = np.argmin(all_t, axis=1)
    best = all_t[np.arange(n), slot]
    hit_index = np.where(best <= max_range, scenario._id_map[slot], -1)
    ranges = np.minimum(best, float(max_range))
    return ranges, hit_index


def _slab_interval(o: float, d: np.ndarray, lo: np.ndarray, hi: np.ndarray,
                   ) -> tuple[np.ndarray, np.ndarray]:
    """Entry/exit ray parameters of one axis slab, shape (N, K)."""
    t1 = (lo[None, :] - o) / d[:, None]
    t2 = (hi[None, :] - o) / d[:, None]
    t_lo = np.minimum(t1, t2)
    t_hi = np.maximum(t1, t2)
    parallel = d == 0.0
    if parallel.any():
        inside = (lo[None, :] <= o) & (o <= hi[None, :])
        p = parallel[:, None]
        t_lo = np.where(p, np.where(inside, -np.inf, np.inf), t_lo)
        t_hi = np.where(p, np.where(inside, np.inf, -np.inf), t_hi)
    return t_lo, t_hi


def _per_obstacle_distance(scenario: Scenario, x: float, y: float) -> np.ndarray:
    """Signed distance to each obstacle separately, in scenario order."""
    out = np.empty(len(scenario.obstacles))
    for i, ob in enumerate(scenario.obstacles):
        if isinstance(ob, Circle):
            out[i] = math.hypot(x - ob.center[0], y - ob.center[1]) - ob.radius
        else:
            qx = max(ob.min_corner[0] - x, x - ob.max_corner[0])
            qy = max(ob.min_corner[1] - y, y - ob.max_corner[1])
            out[i] = math.hypot(max(qx, 0.0), max(qy, 0.0)) + min(max(qx, qy), 0.0)
    return out


def ray_cast(scenario: Scenario, origin: tuple[float, float], azimuth: float,
             max_range: float) -> float:
    """Distance from origin to the first obstacle surface along one ray.

    Returns ``max_range`` on a miss and 0 when the origin lies strictly
    inside an obstacle. Single rays share the vectorized implementation so
    scalar and batched casts agree bit for bit.
    """
    ranges, _ = cast_rays(scenario, origin, np.array([azimuth]), max_range)
    return float(ranges[0])


def cross_track_deviation(start: tuple[float, float], goal: tuple[float, float],
                          point: tuple[float, float]) -> float:
    """Perpendicular distance from a point to the infinite start-goal line.

    Falls back to plain point distance when start and goal coincide.
    """
    ex = goal[0] - start[0]
    ey = goal[1] - start[1]
    px = point[0] - start[0]
    py = point[1] - start[1]
    norm = math.hypot(ex, ey)
    if norm == 0.0:
        return math.hypot(px, py)
    return abs(ex * py - ey * px) / norm


# --------------------------------------------------------------------------
# Scenario document handling
# --------------------------------------------------------------------------

_SECTION_KEYS = {
    "sensor": {
        "lidar_beams", "lidar_range", "lidar_rate", "camera_hfov_deg",
        "camera_rate", "image_width", "image_height",
    },
    "foam": {
        "sectors", "camera_weight", "lidar_weight", "epsilon", "max_depth",
        "yaw_step_deg", "free_threshold",
    },
    "vision": {
        "pyramid_levels", "lk_window", "lk_max_iterations", "lk_epsilon",
        "quality_level", "max_corners", "min_corner_distance",
    },
    "sim": {"dt", "yaw_rate_limit_deg", "goal_tolerance"},
}

_TOP_KEYS = {
    "bounds", "obstacles", "start", "goal", "cruise_speed", "height", "t_max",
    "quad_radius", "sensor", "foam", "vision", "sim", "seed",
}

_DEG_KEYS = {"camera_hfov_deg": "camera_hfov", "yaw_step_deg": "yaw_step",
             "yaw_rate_limit_deg": "yaw_rate_limit"}


def _section(document: dict, name: str) -> dict:
    raw = document.get(name, {})
    if not isinstance(raw, dict):
        raise ScenarioError(f"section '{name}' must be an object, got {type(raw).__name__}")
    unknown = set(raw) - _SECTION_KEYS[name]
    if unknown:
        raise ScenarioError(f"unknown keys in section '{name}': {sorted(unknown)}")
    out = {}
    for key, value in raw.items():
        if key in _DEG_KEYS:
            out[_DEG_KEYS[key]] = math.radians(float(value))
        else:
            out[key] = value
    return out


def _point(raw, what: str) -> tuple[float, float]:
    if (not isinstance(raw, (list, tuple)) or len(raw) != 2
            or not all(isinstance(v, (int, float)) for v in raw)):
        raise ScenarioError(f"{what} must be a [x, y] pair, got {raw!r}")
    return float(raw[0]), float(raw[1])


def _parse_obstacle(raw) -> Obstacle:
    if not isinstance(raw, dict) or "type" not in raw:
        raise ScenarioError(f"obstacle entries need a 'type' key, got {raw!r}")
    kind = raw["type"]
    if kind == "circle":
        if set(raw) != {"type", "center", "radius"}:
            raise ScenarioError(f"circle obstacle keys must be center and radius, got {sorted(raw)}")
        return Circle(center=_point(raw["center"], "circle center"),
                      radius=float(raw["radius"]))
    if kind == "box":
        if set(raw) != {"type", "min", "max"}:
            raise ScenarioError(f"box obstacle keys must be min and max, got {sorted(raw)}")
        return Box(min_corner=_point(raw["min"], "box min"),
                   max_corner=_point(raw["max"], "box max"))
    raise ScenarioError(f"unknown obstacle type {kind!r}")


def _generate_forest(spec: dict, bounds: Box, start: tuple[float, float],
                     goal: tuple[float, float], seed: int) -> tuple[Circle, ...]:
    """Place random circular obstacles, rejecting any too close to the
    start or goal points. Deterministic in the scenario seed."""
    allowed = {"count", "radius_range", "keepout"}
    unknown = set(spec) - allowed
    if unknown:
        raise ScenarioError(f"unknown keys in random_forest: {sorted(unknown)}")
    count = int(spec.get("count", 0))
    r_lo, r_hi = (float(v) for v in spec.get("radius_range", [0.3, 0.8]))
    keepout = float(spec.get("keepout", 3.0))
    if count < 0:
        raise ScenarioError(f"random_forest count must be nonnegative, got {count}")
    if not (0 < r_lo <= r_hi):
        raise ScenarioError(f"random_forest radius_range must be 0 < lo <= hi, got {[r_lo, r_hi]}")
    rng = np.random.default_rng(seed)
    placed: list[Circle] = []
    attempts = 0
    while len(placed) < count:
        attempts += 1
        if attempts > 1000 * max(count, 1):
            raise ScenarioError("could not place random_forest obstacles inside bounds "
                                "outside the start/goal keepout")
        radius = float(rng.uniform(r_lo, r_hi))
        x = float(rng.uniform(bounds.min_corner[0] + radius, bounds.max_corner[0] - radius))
        y = float(rng.uniform(bounds.min_corner[1] + radius, bounds.max_corner[1] - radius))
        if math.hypot(x - start[0], y - start[1]) - radius < keepout:
            continue
        if math.hypot(x - goal[0], y - goal[1]) - radius < keepout:
            continue
        placed.append(Circle(center=(x, y), radius=radius))
    return tuple(placed)


def parse_scenario(document) -> Scenario:
    """Build a validated :class:`Scenario` from a JSON document.

    Accepts a JSON string or an already decoded dict. Raises
    :class:`ScenarioError` with a message naming the violated constraint on
    any schema or validation failure.
    """
    if isinstance(document, (str, bytes)):
        try:
            document = json.loads(document)
        except json.JSONDecodeError as exc:
            raise ScenarioError(f"scenario is not valid JSON: {exc}") from exc
    if not isinstance(document, dict):
        raise ScenarioError(f"scenario document must be an object, got {type(document).__name__}")

    unknown = set(document) - _TOP_KEYS
    if unknown:
        raise ScenarioError(f"unknown top-level keys: {sorted(unknown)}")
    for key in ("bounds", "start", "goal"):
        if key not in document:
            raise ScenarioError(f"scenario is missing required key '{key}'")

    raw_bounds = document["bounds"]
    if not (isinstance(raw_bounds, (list, tuple)) and len(raw_bounds) == 2):
        raise ScenarioError(f"bounds must be [[min_x, min_y], [max_x, max_y]], got {raw_bounds!r}")
    bounds = Box(min_corner=_point(raw_bounds[0], "bounds min"),
                 max_corner=_point(raw_bounds[1], "bounds max"))

    raw_start = document["start"]
    if not (isinstance(raw_start, (list, tuple)) and len(raw_start) == 3):
        raise ScenarioError(f"start must be [x, y, heading_deg], got {raw_start!r}")
    start = _point(raw_start[:2], "start position")
    start_heading = wrap_angle(math.radians(float(raw_start[2])))
    goal = _point(document["goal"], "goal")

    try:
        sensor = SensorParams(**_section(document, "sensor"))
        foam = FoamParams(**_section(document, "foam"))
        vision = VisionParams(**_section(document, "vision"))
        sim = SimConfig(**_section(document, "sim"))
    except ConfigError as exc:
        raise ScenarioError(str(exc)) from exc
    except TypeError as exc:
        raise ScenarioError(f"bad parameter section: {exc}") from exc

    seed = document.get("seed", 0)
    if not isinstance(seed, int) or seed < 0:
        raise ScenarioError(f"seed must be a nonnegative integer, got {seed!r}")

    raw_obstacles = document.get("obstacles", [])
    if isinstance(raw_obstacles, dict):
        if set(raw_obstacles) != {"random_forest"}:
            raise ScenarioError(f"obstacles object form only supports random_forest, "
                                f"got {sorted(raw_obstacles)}")
        obstacles: tuple[Obstacle, ...] = _generate_forest(
            raw_obstacles["random_forest"], bounds, start, goal, seed)
    elif isinstance(raw_obstacles, (list, tuple)):
        obstacles = tuple(_parse_obstacle(o) for o in raw_obstacles)
    else:
        raise ScenarioError(f"obstacles must be a list or a random_forest object, "
                            f"got {type(raw_obstacles).__name__}")

    cruise_speed = float(document.get("cruise_speed", 4.5))
    height = float(document.get("height", 2.0))
    t_max = float(document.get("t_max", 120.0))
    quad_radius = float(document.get("quad_radius", 0.5))
    if cruise_speed <= 0:
        raise ScenarioError(f"cruise_speed must be positive, got {cruise_speed}")
    if height <= 0:
        raise ScenarioError(f"height must be positive, got {height}")
    if t_max <= 0:
        raise ScenarioError(f"t_max must be positive, got {t_max}")
    if quad_radius <= 0:
        raise ScenarioError(f"quad_radius must be positive, got {quad_radius}")

    if not bounds.contains(start):
        raise ScenarioError(f"start {start} lies outside bounds")
    if not bounds.contains(goal):
        raise ScenarioError(f"goal {goal} lies outside bounds")
    if not (0 < foam.max_depth <= sensor.lidar_range):
        raise ScenarioError(f"max_depth must lie in (0, lidar_range], got "
                            f"{foam.max_depth} with lidar_range {sensor.lidar_range}")
    if sensor.lidar_beams < foam.sectors:
        raise ScenarioError(f"lidar_beams must be >= sector count, got "
                            f"{sensor.lidar_beams} < {foam.sectors}")

    scenario = Scenario(bounds=bounds, obstacles=obstacles, start=start,
                        start_heading=start_heading, goal=goal,
                        cruise_speed=cruise_speed, height=height, t_max=t_max,
                        quad_radius=quad_radius, sensor=sensor, foam=foam,
                        vision=vision, sim=sim, seed=seed)
    if min_clearance(scenario, start) < quad_radius:
        raise ScenarioError("start position is in collision with an obstacle")
    return scenario


def load_scenario(path) -> Scenario:
    """Parse a scenario JSON file from disk."""
    with open(path, "r", encoding="utf-8") as fh:
        return parse_scenario(fh.read())


def scenario_to_document(scenario: Scenario) -> dict:
    """Serialize a scenario back to its JSON document form.

    Angles are converted back to degrees. Generated forests serialize as the
    concrete obstacles they produced, so a round trip reparses identically.
    """
    obstacles = []
    for ob in scenario.obstacles:
        if isinstance(ob, Circle):
            obstacles.append({"type": "circle", "center": list(ob.center),
                              "radius": ob.radius})
        else:
            obstacles.append({"type": "box", "min": list(ob.min_corner),
                              "max": list(ob.max_corner)})
    sensor, foam, vision, sim = (scenario.sensor, scenario.foam,
                                 scenario.vision, scenario.sim)
    return {
        "bounds": [list(scenario.bounds.min_corner), list(scenario.bounds.max_corner)],
        "obstacles": obstacles,
        "start": [scenario.start[0], scenario.start[1],
                  math.degrees(scenario.start_heading)],
        "goal": list(scenario.goal),
        "cruise_speed": scenario.cruise_speed,
        "height": scenario.height,
        "t_max": scenario.t_max,
        "quad_radius": scenario.quad_radius,
        "sensor": {
            "lidar_beams": sensor.lidar_beams,
            "lidar_range": sensor.lidar_range,
            "lidar_rate": sensor.lidar_rate,
            "camera_hfov_deg": math.degrees(sensor.camera_hfov),
            "camera_rate": sensor.camera_rate,
            "image_width": sensor.image_width,
            "image_height": sensor.image_height,
        },
        "foam": {
            "sectors": foam.sectors,
            "camera_weight": foam.camera_weight,
            "lidar_weight": foam.lidar_weight,
            "epsilon": foam.epsilon,
            "max_depth": foam.max_depth,
            "yaw_step_deg": math.degrees(foam.yaw_step),
            "free_threshold": foam.free_threshold,
        },
        "vision": {
            "pyramid_levels": vision.pyramid_levels,
            "lk_window": vision.lk_window,
            "lk_max_iterations": vision.lk_max_iterations,
            "lk_epsilon": vision.lk_epsilon,
            "quality_level": vision.quality_level,
            "max_corners": vision.max_corners,
            "min_corner_distance": vision.min_corner_distance,
        },
        "sim": {
            "dt": sim.dt,
            "yaw_rate_limit_deg": math.degrees(sim.yaw_rate_limit),
            "goal_tolerance": sim.goal_tolerance,
        },
        "seed": scenario.seed,
    }

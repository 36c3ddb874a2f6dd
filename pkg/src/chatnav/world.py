"""2D task environment: occupancy grid, scene objects, robot kinematics,
and sensor emulation.

The robot follows the planar unicycle model (x' = v cos th, y' = v sin th,
th' = w) integrated with fixed-step Euler.  Translation is swept against the
grid so the robot clamps at the first wall it would enter; collisions are
reported, never raised.  Sensing is ground-truth based: a ray-cast range scan
plus the set of scene objects inside the field-of-view cone with line of
sight, optionally corrupted by Gaussian noise.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np
import yaml

from . import kernels
from .msgs import Twist

# Sensor defaults modeled on a D435i-class RGB-D camera.
DEFAULT_FOV = math.radians(87.0)
DEFAULT_MAX_RANGE = 10.0
DEFAULT_MIN_RANGE = 0.5
DEFAULT_SCAN_RAYS = 90

# Clamped translations back off this far (meters) from the wall boundary so
# the pose stays strictly inside a free cell.
COLLISION_BACKOFF = 1e-6


class WorldError(ValueError):
    """World file failed to parse or validate."""


def wrap_angle(a: float) -> float:
    """Wrap to (-pi, pi]."""
    r = math.remainder(a, math.tau)
    return math.pi if r == -math.pi else r


@dataclass
class OccupancyGrid:
    occupied: np.ndarray  # uint8 [rows, cols], 1 = occupied
    resolution: float  # meters per cell
    origin: tuple[float, float] = (0.0, 0.0)  # world coords of cell (0, 0) corner

    @property
    def height(self) -> int:
        return self.occupied.shape[0]

    @property
    def width(self) -> int:
        return self.occupied.shape[1]

    @property
    def extent(self) -> tuple[float, float]:
        """(x_size, y_size) in meters."""
        return self.width * self.resolution, self.height * self.resolution

    def world_to_cell(self, x: float, y: float) -> tuple[int, int]:
        return (
            int(math.floor((y - self.origin[1]) / self.resolution)),
            int(math.floor((x - self.origin[0]) / self.resolution)),
        )

    def cell_to_world(self, row: int, col: int) -> tuple[float, float]:
        """Center of the cell."""
        return (
            self.origin[0] + (col + 0.5) * self.resolution,
            self.origin[1] + (row + 0.5) * self.resolution,
        )

    def to_cell_coords(self, x: float, y: float) -> tuple[float, float]:
        """Continuous cell coordinates (col_f, row_f) for the kernels."""
        return (x - self.origin[0]) / self.resolution, (y - self.origin[1]) / self.resolution

    def in_bounds(self, x: float, y: float) -> bool:
        ex, ey = self.extent
        return (self.origin[0] <= x < self.origin[0] + ex
                and self.origin[1] <= y < self.origin[1] + ey)

    def is_free(self, x: float, y: float) -> bool:
        if not self.in_bounds(x, y):
            return False
        r, c = self.world_to_cell(x, y)
        return not self.occupied[r, c]

    def rows_as_text(self) -> list[str]:
        return ["".join("#" if v else "." for v in row) for row in self.occupied]


@dataclass
class SceneObject:
    label: str
    x: float
    y: float
    radius: float = 0.0


@dataclass
class RobotState:
    x: float
    y: float
    theta: float  # rad, (-pi, pi]
    twist: Twist = field(default_factory=Twist)

    @property
    def pose(self) -> tuple[float, float, float]:
        return self.x, self.y, self.theta


@dataclass
class NoiseConfig:
    pose_sigma: float = 0.0
    range_sigma: float = 0.0
    seed: int = 0


@dataclass
class VisibleObject:
    label: str
    bearing: float  # rad, robot frame
    range: float  # m

    def to_payload(self) -> dict:
        return {"label": self.label, "bearing": self.bearing, "range": self.range}


@dataclass
class SensorSnapshot:
    pose: tuple[float, float, float]
    scan: list[tuple[float, float]]  # (bearing, range)
    odom_distance: float
    visible: list[VisibleObject]
    stamp: float = 0.0

    def to_payload(self) -> dict:
        return {
            "pose": {"x": self.pose[0], "y": self.pose[1], "theta": self.pose[2]},
            "scan": [[b, r] for b, r in self.scan],
            "odom_distance": self.odom_distance,
            "visible": [v.to_payload() for v in self.visible],
        }

    @classmethod
    def from_payload(cls, payload: dict, stamp: float = 0.0) -> "SensorSnapshot":
        pose = payload["pose"]
        return cls(
            pose=(pose["x"], pose["y"], pose["theta"]),
            scan=[(b, r) for b, r in payload["scan"]],
            odom_distance=payload["odom_distance"],
            visible=[VisibleObject(v["label"], v["bearing"], v["range"])
                     for v in payload["visible"]],
            stamp=stamp,
        )


@dataclass
class WorldModel:
    grid: OccupancyGrid
    robot: RobotState
    objects: list[SceneObject] = field(default_factory=list)
    rooms: dict[str, tuple[float, float, float]] = field(default_factory=dict)
    fov: float = DEFAULT_FOV
    max_range: float = DEFAULT_MAX_RANGE
    min_range: float = DEFAULT_MIN_RANGE
    scan_rays: int = DEFAULT_SCAN_RAYS
    odom_distance: float = 0.0
    collision_count: int = 0
    last_collision: bool = False
    nonplanar_warnings: int = 0

    def object_labels(self) -> list[str]:
        """Unique object labels in first-appearance order (the default
        description set for perception)."""
        seen: dict[str, None] = {}
        for obj in self.objects:
            seen.setdefault(obj.label, None)
        return list(seen)


def load_world(path: str | Path) -> WorldModel:
    """Parse and validate a world file; see data/office_18x20.world for the
    format."""
    path = Path(path)
    try:
        doc = yaml.safe_load(path.read_text())
    except (OSError, yaml.YAMLError) as exc:
        raise WorldError(f"cannot load world file {path}: {exc}") from exc
    if not isinstance(doc, dict):
        raise WorldError(f"world file {path} must be a mapping")

    try:
        gspec = doc["grid"]
        width = int(gspec["width"])
        height = int(gspec["height"])
        resolution = float(gspec["resolution"])
        rows = gspec["rows"]
        origin = tuple(gspec.get("origin", (0.0, 0.0)))
        start = doc["robot_start"]
    except KeyError as exc:
        raise WorldError(f"world file {path} missing key: {exc}") from exc

    if width < 1 or height < 1:
        raise WorldError("grid dimensions must be >= 1")
    if resolution <= 0:
        raise WorldError("grid resolution must be > 0")
    if len(rows) != height:
        raise WorldError(f"expected {height} grid rows, got {len(rows)}")

    occupied = np.zeros((height, width), dtype=np.uint8)
    # Row 0 of the file is the top of the map (largest y); flip so row index
    # grows with y.
    for file_row, line in enumerate(rows):
        if len(line) != width:
            raise WorldError(f"grid row {file_row} has length {len(line)}, expected {width}")
        r = height - 1 - file_row
        for c, ch in enumerate(line):
            if ch == "#":
                occupied[r, c] = 1
            elif ch != ".":
                raise WorldError(f"grid row {file_row} has invalid cell {ch!r}")

    grid = OccupancyGrid(occupied=occupied, resolution=resolution,
                         origin=(float(origin[0]), float(origin[1])))

    objects = []
    for i, spec in enumerate(doc.get("objects") or []):
        obj = SceneObject(
            label=str(spec["label"]),
            x=float(spec["x"]),
            y=float(spec["y"]),
            radius=float(spec.get("radius", 0.0)),
        )
        if not obj.label:
            raise WorldError(f"object {i} has an empty label")
        if obj.radius < 0:
            raise WorldError(f"object {obj.label!r} has negative radius")
        if not grid.in_bounds(obj.x, obj.y):
            raise WorldError(f"object {obj.label!r} at ({obj.x}, {obj.y}) is outside the grid")
        objects.append(obj)

    rooms: dict[str, tuple[float, float, float]] = {}
    for spec in doc.get("rooms") or []:
        label = str(spec["label"])
        if label in rooms:
            raise WorldError(f"duplicate room label {label!r}")
        rx, ry = float(spec["x"]), float(spec["y"])
        if not grid.in_bounds(rx, ry):
            raise WorldError(f"room {label!r} at ({rx}, {ry}) is outside the grid")
        rooms[label] = (rx, ry, float(spec.get("yaw", 0.0)))

    robot = RobotState(
        x=float(start["x"]), y=float(start["y"]),
        theta=wrap_angle(float(start.get("theta", 0.0))),
    )
    if not grid.in_bounds(robot.x, robot.y):
        raise WorldError(f"robot start ({robot.x}, {robot.y}) is outside the grid")
    if not grid.is_free(robot.x, robot.y):
        cell = grid.world_to_cell(robot.x, robot.y)
        raise WorldError(f"robot start ({robot.x}, {robot.y}) is on occupied cell {cell}")

    world = WorldModel(grid=grid, robot=robot, objects=objects, rooms=rooms)
    for key in ("fov", "max_range", "min_range", "scan_rays"):
        if key in doc.get("sensor", {}):
            setattr(world, key, type(getattr(world, key))(doc["sensor"][key]))
    return world


def step(world: WorldModel, cmd: Twist, dt: float) -> RobotState:
    """Advance the robot one Euler step, clamping translation at walls."""
    if dt <= 0:
        raise ValueError("dt must be > 0")
    if any((cmd.linear[1], cmd.linear[2], cmd.angular[0], cmd.angular[1])):
        world.nonplanar_warnings += 1

    robot = world.robot
    vx, wz = cmd.vx, cmd.wz
    world.last_collision = False

    moved = 0.0
    if vx != 0.0:
        dist = vx * dt
        dx = dist * math.cos(robot.theta)
        dy = dist * math.sin(robot.theta)
        grid = world.grid
        cx0, cy0 = grid.to_cell_coords(robot.x, robot.y)
        cx1, cy1 = grid.to_cell_coords(robot.x + dx, robot.y + dy)
        t = kernels.first_hit(grid.occupied, cx0, cy0, cx1, cy1)
        if t < 1.0:
            world.last_collision = True
            world.collision_count += 1
            t = max(0.0, t - COLLISION_BACKOFF / abs(dist))
        robot.x += t * dx
        robot.y += t * dy
        moved = abs(dist) * t

    robot.theta = wrap_angle(robot.theta + wz * dt)
    robot.twist = cmd
    world.odom_distance += moved
    return robot


def sense(world: WorldModel, noise: Optional[NoiseConfig] = None,
          rng: Optional[np.random.Generator] = None,
          stamp: float = 0.0) -> SensorSnapshot:
    """Ground-truth sensor snapshot, optionally noise-corrupted.

    Scan rays are cast against the grid over the full circle; the visible set
    holds objects inside the FOV cone between min and max range with an
    unobstructed line of sight.  Zero-noise snapshots are deterministic.
    """
    noise = noise or NoiseConfig()
    if rng is None and (noise.pose_sigma > 0 or noise.range_sigma > 0):
        rng = np.random.default_rng(noise.seed)

    robot = world.robot
    grid = world.grid
    x, y, theta = robot.x, robot.y, robot.theta

    bearings = [
        wrap_angle(-math.pi + (i + 0.5) * math.tau / world.scan_rays)
        for i in range(world.scan_rays)
    ]
    cx, cy = grid.to_cell_coords(x, y)
    max_cells = world.max_range / grid.resolution
    angles = np.array([theta + b for b in bearings])
    ranges = kernels.raycast_many(grid.occupied, cx, cy, angles, max_cells)
    ranges = ranges * grid.resolution
    if noise.range_sigma > 0:
        ranges = ranges + rng.normal(0.0, noise.range_sigma, len(ranges))
        ranges = np.clip(ranges, 0.0, world.max_range)
    scan = list(zip(bearings, ranges.tolist()))

    visible = []
    for obj in world.objects:
        dx, dy = obj.x - x, obj.y - y
        rng_m = math.hypot(dx, dy)
        if not (world.min_range <= rng_m <= world.max_range):
            continue
        bearing = wrap_angle(math.atan2(dy, dx) - theta)
        if abs(bearing) >= world.fov / 2:
            continue
        ox, oy = grid.to_cell_coords(obj.x, obj.y)
        if kernels.first_hit(grid.occupied, cx, cy, ox, oy) < 1.0:
            continue
        visible.append(VisibleObject(obj.label, bearing, rng_m))

    pose = (x, y, theta)
    if noise.pose_sigma > 0:
        pose = (
            x + rng.normal(0.0, noise.pose_sigma),
            y + rng.normal(0.0, noise.pose_sigma),
            theta,
        )
    return SensorSnapshot(pose=pose, scan=scan, odom_distance=world.odom_distance,
                          visible=visible, stamp=stamp)


class SimLoop:
    """Owns the world state; applies the latest cmd_vel each tick and
    publishes pose and sensor snapshots."""

    def __init__(self, world: WorldModel, bus, rate: float = 20.0,
                 noise: Optional[NoiseConfig] = None, sensors_every: int = 1) -> None:
        if rate <= 0:
            raise ValueError("loop rate must be > 0")
        self.world = world
        self.bus = bus
        self.rate = rate
        self.dt = 1.0 / rate
        self.noise = noise or NoiseConfig()
        self.sensors_every = max(1, sensors_every)
        self.rng = np.random.default_rng(self.noise.seed)
        self._cmd_sub = bus.subscribe("cmd_vel")
        self._twist = Twist()
        self._tick_count = 0

    def publish_state(self) -> None:
        robot = self.world.robot
        self.bus.publish("pose", {"x": robot.x, "y": robot.y, "theta": robot.theta})
        snapshot = sense(self.world, self.noise, self.rng, stamp=self.bus.clock.now())
        self.bus.publish("sensors", snapshot.to_payload())

    def tick(self, dt: Optional[float] = None) -> None:
        env = self._cmd_sub.latest()
        if env is not None:
            self._twist = Twist.from_payload(env.payload)
        step(self.world, self._twist, dt if dt is not None else self.dt)
        self._tick_count += 1
        robot = self.world.robot
        self.bus.publish("pose", {"x": robot.x, "y": robot.y, "theta": robot.theta})
        if self._tick_count % self.sensors_every == 0:
            snapshot = sense(self.world, self.noise, self.rng, stamp=self.bus.clock.now())
            self.bus.publish("sensors", snapshot.to_payload())

    def run(self, duration: Optional[float] = None, stop_event=None) -> None:
        """Paced loop driven by the bus clock (real or fake)."""
        clock = self.bus.clock
        t_end = None if duration is None else clock.now() + duration
        next_tick = clock.now() + self.dt
        while True:
            if stop_event is not None and stop_event.is_set():
                return
            if t_end is not None and clock.now() >= t_end:
                return
            self.tick()
            next_tick += self.dt
            delay = next_tick - clock.now()
            if delay > 0:
                clock.sleep(delay)

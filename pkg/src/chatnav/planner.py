"""Grid navigation: obstacle inflation, A* path planning, pure-pursuit-style
path following, and the goal-reached predicate.

Planning runs on an inflated copy of the occupancy grid so the robot body
(treated as a disc) stays clear of walls.  Paths are 8-connected sequences of
cell centers with sqrt(2)-weighted diagonals; diagonal moves through blocked
corners are disallowed, both here and in the test oracle.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

from . import kernels
from .msgs import Twist
from .world import OccupancyGrid, wrap_angle

DEFAULT_INFLATION_RADIUS = 0.3  # robot footprint radius, meters


class PlannerError(Exception):
    pass


class StartGoalError(PlannerError):
    """Start or goal lies on an occupied (inflated) cell or off the map."""


class UnreachableError(PlannerError):
    """No path exists between two valid endpoints."""


@dataclass(frozen=True)
class GoalPose:
    x: float
    y: float
    yaw: float


@dataclass
class Path:
    waypoints: list[tuple[float, float]]
    cost: float


@dataclass
class FollowConfig:
    lookahead: float = 0.5
    k_omega: float = 1.2
    v_max: float = 0.8
    omega_max: float = 1.5
    arrival_radius: float = 0.05


def inflate(grid: OccupancyGrid, radius: float) -> OccupancyGrid:
    """Grow obstacles by a metric radius (inclusive, center-to-center)."""
    if radius < 0:
        raise ValueError("inflation radius must be >= 0")
    occupied = kernels.inflate(grid.occupied, radius / grid.resolution)
    return OccupancyGrid(occupied=occupied, resolution=grid.resolution, origin=grid.origin)


def nearest_free(grid: OccupancyGrid, point: tuple[float, float],
                 max_radius: float) -> tuple[float, float] | None:
    """Center of the free cell nearest to a world point, or the point itself
    when it already lies on a free cell.  None when nothing is free within
    max_radius.  Used to escape the inflation margin after a tight approach."""
    if grid.is_free(*point):
        return point
    r0, c0 = grid.world_to_cell(*point)
    k = int(math.ceil(max_radius / grid.resolution)) + 1
    best = None
    best_d = math.inf
    for dr in range(-k, k + 1):
        for dc in range(-k, k + 1):
            r, c = r0 + dr, c0 + dc
            if not (0 <= r < grid.height and 0 <= c < grid.width):
                continue
            if grid.occupied[r, c]:
                continue
            cx, cy = grid.cell_to_world(r, c)
            d = math.hypot(cx - point[0], cy - point[1])
            if d < best_d:
                best, best_d = (cx, cy), d
    if best is not None and best_d <= max_radius:
        return best
    return None


def plan(grid: OccupancyGrid, start: tuple[float, float],
         goal: tuple[float, float]) -> Path:
    """Minimum-cost 8-connected path between two world points.

    Raises StartGoalError for invalid endpoints and UnreachableError when no
    path exists.  Waypoints are cell centers; cost is metric path length.
    """
    sr, sc = grid.world_to_cell(*start)
    gr, gc = grid.world_to_cell(*goal)
    if sr == gr and sc == gc:
        if not (0 <= sr < grid.height and 0 <= sc < grid.width) or grid.occupied[sr, sc]:
            raise StartGoalError(f"cell ({sr}, {sc}) is not free")
        return Path(waypoints=[start], cost=0.0)
    try:
        cost_cells, cells = kernels.astar(grid.occupied, sr, sc, gr, gc)
    except ValueError as exc:
        raise StartGoalError(str(exc)) from exc
    if math.isinf(cost_cells):
        raise UnreachableError(f"no path from {start} to {goal}")
    waypoints = [grid.cell_to_world(int(r), int(c)) for r, c in cells]
    return Path(waypoints=waypoints, cost=cost_cells * grid.resolution)


def _steer(target: tuple[float, float], pose: tuple[float, float, float],
           cfg: FollowConfig) -> Twist:
    x, y, theta = pose
    heading_error = wrap_angle(math.atan2(target[1] - y, target[0] - x) - theta)
    wz = max(-cfg.omega_max, min(cfg.omega_max, cfg.k_omega * heading_error))
    vx = cfg.v_max * max(0.0, math.cos(heading_error))
    return Twist.planar(vx, wz)


def follow_from(path: Path, progress: int, pose: tuple[float, float, float],
                cfg: FollowConfig) -> tuple[Twist, int]:
    """Steering command plus updated progress index.

    Waypoints that enter the lookahead circle are consumed permanently, so
    the target is always ahead along the path and progress never decreases;
    the oscillation trap of re-targeting a passed waypoint cannot occur.
    Waypoint spacing (one cell) is well under the lookahead.
    """
    wps = path.waypoints
    if not wps:
        raise ValueError("cannot follow an empty path")
    x, y, _ = pose
    n = len(wps)
    progress = max(0, min(progress, n - 1))

    if math.hypot(wps[-1][0] - x, wps[-1][1] - y) <= cfg.arrival_radius:
        return Twist(), n - 1

    while progress < n - 1 and \
            math.hypot(wps[progress][0] - x, wps[progress][1] - y) < cfg.lookahead:
        progress += 1
    return _steer(wps[progress], pose, cfg), progress


def follow(path: Path, pose: tuple[float, float, float],
           cfg: FollowConfig | None = None) -> Twist:
    """Velocity command steering the robot along the path toward its end."""
    return follow_from(path, 0, pose, cfg or FollowConfig())[0]


def goal_reached(pose: tuple[float, float, float], goal: GoalPose,
                 tol_pos: float, tol_yaw: float) -> bool:
    """Inclusive tolerance test on position and wrapped yaw error."""
    if tol_pos <= 0 or tol_yaw <= 0:
        raise ValueError("tolerances must be > 0")
    if math.hypot(pose[0] - goal.x, pose[1] - goal.y) > tol_pos:
        return False
    return abs(wrap_angle(pose[2] - goal.yaw)) <= tol_yaw

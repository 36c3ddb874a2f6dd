"""Four-way intent dispatcher driving the robot.

Navigation goals resolve to registry coordinates and start a monitored
pursuit; motion commands play timed velocity sequences; queries route back to
the language node; stop and unknown intents halt the robot.  This node is the
only publisher of cmd_vel, every outgoing command is clamped to the velocity
limits, and a new dispatch preempts whatever was running, beginning with a
zero command.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import yaml

from . import planner
from .msgs import Twist
from .nlu import Intent
from .world import OccupancyGrid, wrap_angle

QUAT_TOL = 1e-6
DEFAULT_GOAL_TOL_POS = 0.3
DEFAULT_GOAL_TOL_YAW = 0.3
DEFAULT_GOAL_TIMEOUT = 120.0
DEFAULT_ESCAPE_RADIUS = 1.0  # max snap distance out of the inflation margin


class ConfigError(ValueError):
    """Locations or patterns file failed to load or validate."""


@dataclass(frozen=True)
class VelocityLimits:
    v_max: float = 0.8
    omega_max: float = 1.5

    def clamp(self, twist: Twist) -> Twist:
        vx = max(-self.v_max, min(self.v_max, twist.vx))
        wz = max(-self.omega_max, min(self.omega_max, twist.wz))
        return Twist.planar(vx, wz)

    def within(self, twist: Twist) -> bool:
        return abs(twist.vx) <= self.v_max and abs(twist.wz) <= self.omega_max


@dataclass
class LocationEntry:
    label: str
    x: float
    y: float
    z: float  # quaternion z (yaw-only convention)
    w: float  # quaternion w
    aliases: list[str] = field(default_factory=list)


class LocationRegistry:
    """Label -> goal coordinates, with free-text aliases for decoding."""

    def __init__(self, entries: list[LocationEntry]) -> None:
        self.entries: dict[str, LocationEntry] = {}
        for entry in entries:
            if not entry.label:
                raise ConfigError("location with empty label")
            if entry.label in self.entries:
                raise ConfigError(f"duplicate location label {entry.label!r}")
            if abs(entry.z ** 2 + entry.w ** 2 - 1.0) > QUAT_TOL:
                raise ConfigError(
                    f"location {entry.label!r}: (z, w) = ({entry.z}, {entry.w}) "
                    "is not a unit yaw quaternion")
            self.entries[entry.label] = entry

    def __contains__(self, label: str) -> bool:
        return label in self.entries

    def __len__(self) -> int:
        return len(self.entries)

    def labels(self) -> list[str]:
        return list(self.entries)

    def alias_map(self) -> dict[str, str]:
        """Every phrase that should resolve to each label (the label itself,
        its space-separated form, and the listed aliases)."""
        mapping: dict[str, str] = {}
        for label, entry in self.entries.items():
            mapping[label] = label
            mapping[label.replace("_", " ")] = label
            for alias in entry.aliases:
                mapping[alias] = label
        return mapping

    @classmethod
    def from_rooms(cls, rooms: dict[str, tuple[float, float, float]],
                   aliases: Optional[dict[str, list[str]]] = None) -> "LocationRegistry":
        entries = []
        for label, (x, y, yaw) in rooms.items():
            entries.append(LocationEntry(
                label=label, x=x, y=y,
                z=math.sin(yaw / 2), w=math.cos(yaw / 2),
                aliases=(aliases or {}).get(label, []),
            ))
        return cls(entries)


def load_locations(path: str | Path) -> LocationRegistry:
    path = Path(path)
    try:
        doc = yaml.safe_load(path.read_text())
    except (OSError, yaml.YAMLError) as exc:
        raise ConfigError(f"cannot load locations {path}: {exc}") from exc
    if not isinstance(doc, dict) or not isinstance(doc.get("locations"), list):
        raise ConfigError(f"locations file {path} needs a 'locations' list")
    entries = []
    for spec in doc["locations"]:
        try:
            entries.append(LocationEntry(
                label=str(spec["label"]), x=float(spec["x"]), y=float(spec["y"]),
                z=float(spec["z"]), w=float(spec["w"]),
                aliases=[str(a) for a in spec.get("aliases", [])],
            ))
        except KeyError as exc:
            raise ConfigError(f"location entry missing key {exc}") from exc
    return LocationRegistry(entries)


class MissingLocationError(KeyError):
    pass


def resolve_goal(label: str, registry: LocationRegistry) -> planner.GoalPose:
    """Registry coordinates as a planar goal; yaw = 2*atan2(z, w)."""
    entry = registry.entries.get(label)
    if entry is None:
        raise MissingLocationError(label)
    return planner.GoalPose(x=entry.x, y=entry.y,
                            yaw=wrap_angle(2.0 * math.atan2(entry.z, entry.w)))


@dataclass
class PatternStep:
    twist: Twist
    duration: float


class MotionPatternTable:
    def __init__(self, entries: dict[str, list[PatternStep]],
                 limits: Optional[VelocityLimits] = None) -> None:
        limits = limits or VelocityLimits()
        if not entries:
            raise ConfigError("pattern table is empty")
        for name, steps in entries.items():
            if not name:
                raise ConfigError("pattern with empty name")
            if not steps:
                raise ConfigError(f"pattern {name!r} has no steps")
            for step in steps:
                if step.duration <= 0:
                    raise ConfigError(f"pattern {name!r} has non-positive duration")
                if not limits.within(step.twist):
                    raise ConfigError(
                        f"pattern {name!r} exceeds velocity limits "
                        f"(vx={step.twist.vx}, wz={step.twist.wz})")
        self.entries = entries

    def __contains__(self, name: str) -> bool:
        return name in self.entries

    def names(self) -> list[str]:
        return list(self.entries)


def load_patterns(path: str | Path,
                  limits: Optional[VelocityLimits] = None) -> MotionPatternTable:
    path = Path(path)
    try:
        doc = yaml.safe_load(path.read_text())
    except (OSError, yaml.YAMLError) as exc:
        raise ConfigError(f"cannot load patterns {path}: {exc}") from exc
    if not isinstance(doc, dict) or not isinstance(doc.get("patterns"), dict):
        raise ConfigError(f"patterns file {path} needs a 'patterns' mapping")
    entries = {}
    for name, steps in doc["patterns"].items():
        entries[str(name)] = [
            PatternStep(
                twist=Twist.planar(float(s.get("vx", 0.0)), float(s.get("wz", 0.0))),
                duration=float(s.get("duration", 0.0)),
            )
            for s in steps
        ]
    return MotionPatternTable(entries, limits)


def pattern_violations(path: str | Path,
                       limits: Optional[VelocityLimits] = None) -> list[str]:
    """Every invariant violation in a patterns file (for config validation)."""
    limits = limits or VelocityLimits()
    try:
        doc = yaml.safe_load(Path(path).read_text())
    except (OSError, yaml.YAMLError) as exc:
        return [f"cannot load patterns {path}: {exc}"]
    if not isinstance(doc, dict) or not isinstance(doc.get("patterns"), dict):
        return [f"patterns file {path} needs a 'patterns' mapping"]
    out = []
    for name, steps in doc["patterns"].items():
        if not steps:
            out.append(f"pattern {name!r} has no steps")
            continue
        for i, s in enumerate(steps):
            twist = Twist.planar(float(s.get("vx", 0.0)), float(s.get("wz", 0.0)))
            if float(s.get("duration", 0.0)) <= 0:
                out.append(f"pattern {name!r} step {i} has non-positive duration")
            if not limits.within(twist):
                out.append(f"pattern {name!r} step {i} exceeds velocity limits "
                           f"(vx={twist.vx}, wz={twist.wz})")
    return out


def location_violations(path: str | Path) -> list[str]:
    """Every invariant violation in a locations file."""
    try:
        doc = yaml.safe_load(Path(path).read_text())
    except (OSError, yaml.YAMLError) as exc:
        return [f"cannot load locations {path}: {exc}"]
    if not isinstance(doc, dict) or not isinstance(doc.get("locations"), list):
        return [f"locations file {path} needs a 'locations' list"]
    out = []
    seen = set()
    for i, spec in enumerate(doc["locations"]):
        label = str(spec.get("label", ""))
        if not label:
            out.append(f"location {i} has an empty label")
            continue
        if label in seen:
            out.append(f"duplicate location label {label!r}")
        seen.add(label)
        missing = [k for k in ("x", "y", "z", "w") if k not in spec]
        if missing:
            out.append(f"location {label!r} missing {missing}")
            continue
        z, w = float(spec["z"]), float(spec["w"])
        if abs(z * z + w * w - 1.0) > QUAT_TOL:
            out.append(f"location {label!r}: z^2 + w^2 = {z * z + w * w:.6f}, "
                       "not a unit yaw quaternion")
    return out


@dataclass
class NavStatus:
    state: str  # pending | active | succeeded | aborted | timed_out
    goal_label: Optional[str] = None
    final_pose_error: Optional[float] = None

    def to_payload(self) -> dict:
        return {"state": self.state, "goal_label": self.goal_label,
                "final_pose_error": self.final_pose_error}


@dataclass
class DispatchOutcome:
    branch: str  # "goal" | "pattern" | "query" | "stop"
    ok: bool = True
    detail: str = ""


class _PatternActivity:
    def __init__(self, name: str, steps: list[PatternStep], record_id: Optional[int]):
        self.name = name
        self.steps = steps
        self.record_id = record_id
        self.index = 0
        self.elapsed = 0.0

    def next_twist(self, dt: float) -> Optional[Twist]:
        """Twist for this control tick, or None when the sequence is over."""
        while self.index < len(self.steps) and \
                self.elapsed >= self.steps[self.index].duration:
            self.elapsed -= self.steps[self.index].duration
            self.index += 1
        if self.index >= len(self.steps):
            return None
        self.elapsed += dt
        return self.steps[self.index].twist


class _GoalActivity:
    def __init__(self, goal: planner.GoalPose, label: Optional[str], path: planner.Path,
                 record_id: Optional[int], deadline: float, cfg: planner.FollowConfig):
        self.goal = goal
        self.label = label
        self.record_id = record_id
        self.deadline = deadline
        self.cfg = cfg
        # Steer through the planned cells, then home in on the exact goal point.
        self.track = planner.Path(
            waypoints=list(path.waypoints) + [(goal.x, goal.y)], cost=path.cost)
        self.progress = 0
        self.aligning = False


class Dispatcher:
    """Sequential dispatcher; owns cmd_vel exclusively."""

    def __init__(self, bus, registry: LocationRegistry, patterns: MotionPatternTable,
                 nav_grid: OccupancyGrid,
                 limits: Optional[VelocityLimits] = None,
                 follow_cfg: Optional[planner.FollowConfig] = None,
                 goal_tol_pos: float = DEFAULT_GOAL_TOL_POS,
                 goal_tol_yaw: float = DEFAULT_GOAL_TOL_YAW,
                 goal_timeout: float = DEFAULT_GOAL_TIMEOUT,
                 escape_radius: float = DEFAULT_ESCAPE_RADIUS) -> None:
        self.bus = bus
        self.registry = registry
        self.patterns = patterns
        self.nav_grid = nav_grid  # already inflated
        self.limits = limits or VelocityLimits()
        self.follow_cfg = follow_cfg or planner.FollowConfig(
            v_max=self.limits.v_max, omega_max=self.limits.omega_max)
        self.goal_tol_pos = goal_tol_pos
        self.goal_tol_yaw = goal_tol_yaw
        self.goal_timeout = goal_timeout
        self.escape_radius = escape_radius
        self._intent_sub = bus.subscribe("intent")
        self._pose_sub = bus.subscribe("pose")
        self._pose: Optional[tuple[float, float, float]] = None
        self._activity: Optional[object] = None
        self.last_outcome: Optional[DispatchOutcome] = None

    # -- plumbing ---------------------------------------------------------

    def _publish_twist(self, twist: Twist) -> None:
        self.bus.publish("cmd_vel", self.limits.clamp(twist).to_payload())

    def _publish_nav(self, status: NavStatus) -> None:
        self.bus.publish("nav/status", status.to_payload())

    def _dispatch_event(self, record_id: Optional[int], event: str,
                        nav_success: Optional[bool] = None,
                        nav_state: Optional[str] = None) -> None:
        if record_id is None:
            return
        payload = {"record_id": record_id, "event": event,
                   "stamp": self.bus.clock.now()}
        if nav_success is not None:
            payload["nav_success"] = nav_success
        if nav_state is not None:
            payload["nav_state"] = nav_state
        self.bus.publish("log/dispatch", payload)

    def _chat_error(self, text: str) -> None:
        self.bus.publish("chat/out", {"text": text})

    def _refresh_pose(self) -> None:
        env = self._pose_sub.latest()
        if env is not None:
            p = env.payload
            self._pose = (p["x"], p["y"], p["theta"])

    @property
    def busy(self) -> bool:
        return self._activity is not None

    # -- dispatch ---------------------------------------------------------

    def _preempt(self) -> None:
        """End any running activity, leading with a zero command."""
        if self._activity is None:
            return
        act = self._activity
        self._activity = None
        self._publish_twist(Twist())
        if isinstance(act, _GoalActivity):
            self._publish_nav(NavStatus("aborted", act.label,
                                        self._goal_error(act)))
            self._dispatch_event(act.record_id, "ended", nav_success=False,
                                 nav_state="aborted")
        else:
            self._dispatch_event(act.record_id, "ended")

    def _goal_error(self, act: "_GoalActivity") -> Optional[float]:
        if self._pose is None:
            return None
        return math.hypot(self._pose[0] - act.goal.x, self._pose[1] - act.goal.y)

    def stop(self, record_id: Optional[int] = None) -> None:
        """Cancel anything active and command zero velocities."""
        self._preempt()
        self._publish_twist(Twist())
        self._dispatch_event(record_id, "started")
        self._dispatch_event(record_id, "ended")

    def dispatch(self, intent: Intent) -> DispatchOutcome:
        """Route one intent to its execution branch."""
        self._refresh_pose()
        kind = intent.kind

        if kind == "query":
            # Answered by the language node from sensor data; nothing to run.
            outcome = DispatchOutcome(branch="query")
        elif kind in ("stop", "unknown"):
            self.stop(intent.record_id)
            outcome = DispatchOutcome(branch="stop", detail=kind)
        elif kind == "motion":
            outcome = self._start_pattern(intent)
        elif kind == "nav_goal":
            outcome = self._start_goal(intent)
        else:  # unreachable; Intent validates kinds
            self.stop(intent.record_id)
            outcome = DispatchOutcome(branch="stop", ok=False, detail=f"bad kind {kind}")
        self.last_outcome = outcome
        return outcome

    def execute_pattern(self, name: str, record_id: Optional[int] = None) -> DispatchOutcome:
        if name not in self.patterns:
            self.stop(record_id)
            self._chat_error(f"Unknown motion pattern '{name}'; stopping.")
            return DispatchOutcome(branch="stop", ok=False, detail=f"no pattern {name}")
        self._preempt()
        self._activity = _PatternActivity(name, self.patterns.entries[name], record_id)
        self._dispatch_event(record_id, "started")
        return DispatchOutcome(branch="pattern", detail=name)

    def _start_pattern(self, intent: Intent) -> DispatchOutcome:
        return self.execute_pattern(intent.pattern or "", intent.record_id)

    def _abort_goal(self, label: Optional[str], record_id: Optional[int],
                    err: Optional[float]) -> None:
        """Safety stop plus a terminal aborted status for a goal that never
        started moving."""
        self._publish_twist(Twist())
        self._publish_nav(NavStatus("aborted", label, err))
        self._dispatch_event(record_id, "started")
        self._dispatch_event(record_id, "ended", nav_success=False, nav_state="aborted")

    def pursue_goal(self, goal: planner.GoalPose, label: Optional[str] = None,
                    record_id: Optional[int] = None) -> DispatchOutcome:
        self._preempt()
        if self._pose is None:
            self._chat_error("I do not know my position yet; cannot navigate.")
            self._abort_goal(label, record_id, None)
            return DispatchOutcome(branch="goal", ok=False, detail="no pose")
        # A tight previous approach can leave the robot inside the inflation
        # margin; plan from the nearest free cell instead of refusing to move.
        start = planner.nearest_free(self.nav_grid, self._pose[:2],
                                     self.escape_radius)
        if start is None:
            self._chat_error("I am wedged against an obstacle and cannot plan.")
            self._abort_goal(label, record_id, self._distance_to(goal))
            return DispatchOutcome(branch="goal", ok=False, detail="no escape")
        try:
            path = planner.plan(self.nav_grid, start, (goal.x, goal.y))
        except planner.PlannerError as exc:
            self._chat_error(f"No path to {label or 'goal'}: {exc}")
            self._abort_goal(label, record_id, self._distance_to(goal))
            return DispatchOutcome(branch="goal", ok=False, detail="no path")
        deadline = self.bus.clock.now() + self.goal_timeout
        self._activity = _GoalActivity(goal, label, path, record_id, deadline,
                                       self.follow_cfg)
        self.bus.publish("nav/path", {
            "goal_label": label,
            "waypoints": [[x, y] for x, y in path.waypoints],
        })
        self._publish_nav(NavStatus("active", label, None))
        self._dispatch_event(record_id, "started")
        return DispatchOutcome(branch="goal", detail=label or "")

    def _start_goal(self, intent: Intent) -> DispatchOutcome:
        label = intent.destination
        if intent.unresolved or label is None or label not in self.registry:
            self._chat_error(f"Unknown destination '{label}'; stopping.")
            self._preempt()
            self._abort_goal(label, intent.record_id, None)
            return DispatchOutcome(branch="goal", ok=False, detail="unknown destination")
        goal = resolve_goal(label, self.registry)
        return self.pursue_goal(goal, label, intent.record_id)

    def _distance_to(self, goal: planner.GoalPose) -> Optional[float]:
        if self._pose is None:
            return None
        return math.hypot(self._pose[0] - goal.x, self._pose[1] - goal.y)

    # -- per-tick control -------------------------------------------------

    def tick(self, dt: float) -> None:
        """Process queued intents, then drive the active activity one step."""
        while True:
            env = self._intent_sub.get_nowait()
            if env is None:
                break
            self.dispatch(Intent.from_payload(env.payload))
        self._refresh_pose()
        act = self._activity
        if act is None:
            return
        if isinstance(act, _PatternActivity):
            twist = act.next_twist(dt)
            if twist is None:
                self._activity = None
                self._publish_twist(Twist())
                self._dispatch_event(act.record_id, "ended")
            else:
                self._publish_twist(twist)
        else:
            self._tick_goal(act, dt)

    def _finish_goal(self, act: "_GoalActivity", state: str, success: bool) -> None:
        self._activity = None
        self._publish_twist(Twist())
        self._publish_nav(NavStatus(state, act.label, self._goal_error(act)))
        self._dispatch_event(act.record_id, "ended", nav_success=success,
                             nav_state=state)

    def _tick_goal(self, act: "_GoalActivity", dt: float) -> None:
        if self._pose is None:
            self._publish_twist(Twist())
            return
        if self.bus.clock.now() > act.deadline:
            self._finish_goal(act, "timed_out", False)
            return
        pose = self._pose
        dist = math.hypot(pose[0] - act.goal.x, pose[1] - act.goal.y)
        if not act.aligning and dist <= self.goal_tol_pos:
            act.aligning = True
        if act.aligning:
            yaw_err = wrap_angle(act.goal.yaw - pose[2])
            if abs(yaw_err) <= self.goal_tol_yaw:
                self._finish_goal(act, "succeeded", True)
                return
            wz = max(-self.limits.omega_max,
                     min(self.limits.omega_max, self.follow_cfg.k_omega * yaw_err))
            self._publish_twist(Twist.planar(0.0, wz))
            return
        twist, act.progress = planner.follow_from(act.track, act.progress, pose,
                                                  self.follow_cfg)
        self._publish_twist(twist)

"""Session wiring and the headless evaluation driver.

A Session builds the full node graph (simulation, perception, language,
dispatch, logging) over one bus and steps it as a single-threaded conductor
loop: language first, then dispatch, then simulation, then perception.  Live
runs pace the loop with the wall clock; evaluation runs swap in a fake clock
and tick as fast as the CPU allows while keeping every timestamp exact.
"""

from __future__ import annotations

import json
import threading
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Optional

from . import dispatch, metrics, perception, planner, world as world_mod
from .bus import Bus
from .clock import FakeClock, WallClock
from .nlu import (GrammarError, HttpLmBackend, IntentGrammar, NluNode,
                  RuleBackend, load_grammar)
from .world import NoiseConfig, SimLoop, WorldError, load_world

OIA_RECORD_ID_BASE = 1_000_000_000


def data_path(name: str) -> Path:
    """Path of a packaged data file (worlds, grammar, patterns, locations)."""
    return Path(resources.files("chatnav") / "data" / name)


@dataclass
class ScenarioConfig:
    world: Path = field(default_factory=lambda: data_path("office_18x20.world"))
    grammar: Path = field(default_factory=lambda: data_path("grammar.yaml"))
    locations: Optional[Path] = field(
        default_factory=lambda: data_path("locations_office.yaml"))
    patterns: Path = field(default_factory=lambda: data_path("patterns.yaml"))
    backend: str = "rule"  # rule | http
    endpoint: Optional[str] = None
    prompt_template: str = "Map this robot command to one label: {utterance}"
    http_timeout: float = 5.0
    http_headers: dict = field(default_factory=dict)
    noise_sigma: float = 0.0  # embedding noise
    pose_sigma: float = 0.0
    range_sigma: float = 0.0
    rate: float = 20.0
    port: int = 8765
    log_path: Optional[Path] = None
    seed: int = 7
    embed_dim: int = 64
    sensors_every: int = 1
    inflation_radius: float = planner.DEFAULT_INFLATION_RADIUS
    goal_timeout: float = dispatch.DEFAULT_GOAL_TIMEOUT
    v_max: float = 0.8
    omega_max: float = 1.5

    def validate(self) -> list[str]:
        """Every config violation found, empty when clean."""
        violations: list[str] = []
        wm = None
        try:
            wm = load_world(self.world)
        except (WorldError, OSError) as exc:
            violations.append(f"world: {exc}")

        grammar = None
        try:
            grammar = load_grammar(self.grammar)
        except (GrammarError, OSError) as exc:
            violations.append(f"grammar: {exc}")

        limits = dispatch.VelocityLimits(self.v_max, self.omega_max)
        pattern_names: set[str] = set()
        if not Path(self.patterns).exists():
            violations.append(f"patterns: file not found: {self.patterns}")
        else:
            violations.extend(f"patterns: {v}"
                              for v in dispatch.pattern_violations(self.patterns, limits))
            try:
                import yaml as _yaml
                doc = _yaml.safe_load(Path(self.patterns).read_text())
                pattern_names = set((doc or {}).get("patterns", {}) or {})
            except Exception:
                pass

        if self.locations is not None:
            if not Path(self.locations).exists():
                violations.append(f"locations: file not found: {self.locations}")
            else:
                violations.extend(f"locations: {v}"
                                  for v in dispatch.location_violations(self.locations))
        elif wm is not None and not wm.rooms:
            violations.append("locations: no file given and the world has no rooms")

        if grammar is not None:
            for entry in grammar.entries:
                if entry.kind == "motion" and entry.pattern not in pattern_names:
                    violations.append(
                        f"grammar: motion entry {entry.label!r} references "
                        f"unknown pattern {entry.pattern!r}")
        if self.rate <= 0:
            violations.append(f"rate: must be > 0, got {self.rate}")
        if self.backend not in ("rule", "http"):
            violations.append(f"backend: must be rule or http, got {self.backend!r}")
        if self.backend == "http" and not self.endpoint:
            violations.append("backend: http backend needs --endpoint")
        return violations


@dataclass
class CorpusLine:
    text: str
    true_label: Optional[str] = None
    goal: Optional[str] = None


class CorpusError(ValueError):
    pass


def load_corpus(path: str | Path) -> list[CorpusLine]:
    lines = []
    with open(path, encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            raw = raw.strip()
            if not raw:
                continue
            try:
                doc = json.loads(raw)
            except json.JSONDecodeError as exc:
                raise CorpusError(f"corpus line {lineno}: invalid JSON ({exc})")
            if not isinstance(doc, dict) or not isinstance(doc.get("text"), str):
                raise CorpusError(f"corpus line {lineno}: needs a 'text' string")
            lines.append(CorpusLine(text=doc["text"],
                                    true_label=doc.get("true_label"),
                                    goal=doc.get("goal")))
    return lines


class InteractionLogger:
    """Merges interaction records with dispatch timing events and writes the
    append-only JSON-lines log."""

    def __init__(self, bus, path: Optional[Path] = None) -> None:
        self.bus = bus
        self.path = Path(path) if path else None
        self._fh = open(self.path, "a", encoding="utf-8") if self.path else None
        self._record_sub = bus.subscribe("log/interaction")
        self._event_sub = bus.subscribe("log/dispatch")
        self._pending: dict[int, dict] = {}
        self.records: list[dict] = []

    def _write(self, record: dict) -> None:
        self.records.append(record)
        if self._fh is not None:
            self._fh.write(json.dumps(record, sort_keys=True) + "\n")
            self._fh.flush()

    def process(self) -> None:
        for env in self._record_sub.drain():
            record = env.payload
            if record["stamps"].get("action_ended") is not None or \
                    record["intent_kind"] == "query":
                self._write(record)
            else:
                self._pending[record["id"]] = record
        for env in self._event_sub.drain():
            event = env.payload
            record = self._pending.get(event["record_id"])
            if record is None:
                continue
            if event["event"] == "started":
                if record["stamps"].get("action_started") is None:
                    record["stamps"]["action_started"] = event["stamp"]
            else:
                record["stamps"]["action_ended"] = event["stamp"]
                if "nav_success" in event:
                    record["outcome"]["nav_success"] = event["nav_success"]
                if "nav_state" in event:
                    record["outcome"]["nav_state"] = event["nav_state"]
                self._write(self._pending.pop(event["record_id"]))

    def flush(self) -> None:
        """Write whatever is still pending (incomplete stamps and all)."""
        self.process()
        for rid in sorted(self._pending):
            self._write(self._pending.pop(rid))
        if self._fh is not None:
            self._fh.flush()

    def close(self) -> None:
        self.flush()
        if self._fh is not None:
            self._fh.close()
            self._fh = None


class Session:
    """The full node graph over one bus."""

    def __init__(self, config: ScenarioConfig, clock=None) -> None:
        self.config = config
        self.bus = Bus(clock=clock if clock is not None else WallClock())
        self.clock = self.bus.clock

        self.world = load_world(config.world)
        noise = NoiseConfig(pose_sigma=config.pose_sigma,
                            range_sigma=config.range_sigma, seed=config.seed)
        self.sim = SimLoop(self.world, self.bus, rate=config.rate, noise=noise,
                           sensors_every=config.sensors_every)

        self.provider = perception.MockEmbeddingProvider(dim=config.embed_dim,
                                                         seed=config.seed)
        self.dset = perception.description_set_for_world(self.world)
        self.perception = perception.PerceptionNode(
            self.provider, self.dset, self.bus, sigma=config.noise_sigma)

        if config.locations is not None:
            self.registry = dispatch.load_locations(config.locations)
        else:
            self.registry = dispatch.LocationRegistry.from_rooms(self.world.rooms)
        self.grammar: IntentGrammar = load_grammar(config.grammar)
        self.grammar.attach_destinations(self.registry.alias_map())

        if config.backend == "http":
            self.backend = HttpLmBackend(
                endpoint=config.endpoint or "",
                prompt_template=config.prompt_template,
                timeout=config.http_timeout,
                headers=config.http_headers,
                labels=self.grammar.labels(),
            )
        else:
            self.backend = RuleBackend(self.grammar)
        self.nlu = NluNode(self.bus, self.grammar, self.backend)

        limits = dispatch.VelocityLimits(config.v_max, config.omega_max)
        self.patterns = dispatch.load_patterns(config.patterns, limits)
        self.nav_grid = planner.inflate(self.world.grid, config.inflation_radius)
        self.dispatcher = dispatch.Dispatcher(self.bus, self.registry, self.patterns, self.nav_grid,
                               limits=limits, goal_timeout=config.goal_timeout)

        self.logger = InteractionLogger(self.bus, config.log_path)
        self.dt = 1.0 / config.rate
        self._primed = False

    def prime(self) -> None:
        """Publish initial pose and sensor data so nodes start with state."""
        if not self._primed:
            self.sim.publish_state()
            self.perception.tick()
            self._primed = True

    def tick(self, dt: Optional[float] = None) -> None:
        dt = dt if dt is not None else self.dt
        self.nlu.tick()
        self.dispatcher.tick(dt)
        self.sim.tick(dt)
        self.perception.tick()
        self.logger.process()

    def run(self, duration: Optional[float] = None,
            stop_event: Optional[threading.Event] = None) -> None:
        """Paced conductor loop for live sessions."""
        self.prime()
        clock = self.clock
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

    def shutdown(self) -> None:
        """Final safety stop, then flush the log."""
        self.dispatcher.stop()
        self.sim.tick(self.dt)
        self.logger.close()


class EvalDriver:
    """Feeds corpus lines through the full pipeline headlessly.

    Requires the session to run on a FakeClock; each line is injected as a
    chat message, the stack is ticked until the dispatched action terminates,
    and ground truth from the simulator scores detection outcomes for
    visible-objects queries.
    """

    def __init__(self, session: Session, pipeline_delay: float = 0.0,
                 score_detections: bool = True) -> None:
        if not isinstance(session.clock, FakeClock):
            raise ValueError("evaluation needs a session built on a FakeClock")
        self.session = session
        self.pipeline_delay = pipeline_delay
        self.score_detections = score_detections
        self._oia_counter = OIA_RECORD_ID_BASE

    def _emit_detection_records(self) -> None:
        # Score the frame the language node actually answered from.
        session = self.session
        detections = session.nlu._detections
        objects = session.world.objects
        dets = [perception.Detection(label=d["label"], score=d["score"],
                                     x=d["x"], y=d["y"], stamp=d["stamp"])
                for d in detections]
        verdicts = perception.score_detections(dets, objects)
        now = session.clock.now()
        for det, ok in zip(dets, verdicts):
            nearest = min(objects, key=lambda o: (o.x - det.x) ** 2 + (o.y - det.y) ** 2) \
                if objects else None
            self._oia_counter += 1
            record = {
                "id": self._oia_counter,
                "input_text": "",
                "lm_output": None,
                "predicted_label": det.label,
                "true_label": nearest.label if nearest else None,
                "intent_kind": "perception",
                "stamps": {"gui_sent": None, "node_received": now,
                           "action_started": None, "action_ended": None},
                "outcome": {"nav_success": None, "nav_state": None,
                            "detection_correct": ok},
                "lm_latency": None,
            }
            session.logger._write(record)

    def run_line(self, line: CorpusLine,
                 per_line_timeout: Optional[float] = None) -> None:
        session = self.session
        clock = session.clock
        session.prime()

        # Fresh sensor frame so queries answer from current data.
        clock.advance(session.dt)
        session.sim.tick(session.dt)
        session.perception.tick()

        payload = {"text": line.text}
        if line.true_label is not None:
            payload["true_label"] = line.true_label
        session.bus.publish("chat/in", payload)
        if self.pipeline_delay > 0:
            clock.advance(self.pipeline_delay)
        session.nlu.tick()
        session.dispatcher.tick(session.dt)
        session.sim.tick(session.dt)
        session.perception.tick()

        timeout = per_line_timeout if per_line_timeout is not None \
            else session.config.goal_timeout + 5.0
        deadline = clock.now() + timeout
        while session.dispatcher.busy and clock.now() < deadline:
            clock.advance(session.dt)
            session.dispatcher.tick(session.dt)
            session.sim.tick(session.dt)
            session.perception.tick()

        session.logger.process()
        if self.score_detections and session.logger.records:
            last = session.logger.records[-1]
            if last.get("predicted_label") == "query_visible_objects":
                self._emit_detection_records()

    def run_corpus(self, lines: list[CorpusLine],
                   per_line_timeout: Optional[float] = None) -> list[dict]:
        for line in lines:
            self.run_line(line, per_line_timeout)
        self.session.logger.flush()
        return list(self.session.logger.records)


def evaluate_corpus(config: ScenarioConfig, corpus_path: Path,
                    report_path: Optional[Path] = None,
                    pipeline_delay: float = 0.0) -> metrics.MetricsReport:
    """Headless corpus evaluation: returns (and optionally writes) the report."""
    lines = load_corpus(corpus_path)
    session = Session(config, clock=FakeClock())
    driver = EvalDriver(session, pipeline_delay=pipeline_delay)
    records = driver.run_corpus(lines)
    session.shutdown()
    if report_path is not None:
        return metrics.emit_report(records, report_path)
    return metrics.build_report(records)

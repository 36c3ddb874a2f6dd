"""Natural-language front end: normalizes chat input, decodes it into
intents against a phrase grammar, answers sensor queries, and logs every
exchange.

Decode order is deliberate: exact phrase match, then slot patterns, then the
pluggable language-model backend, then Unknown.  The deterministic grammar
path stays authoritative; a backend (rule-based or HTTP) only sees text the
grammar could not place.  Decoding is total: any input yields a well-formed
intent, with Unknown as the safe fallback.
"""

from __future__ import annotations

import re
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Protocol

import requests
import yaml

from .world import SensorSnapshot

INTENT_KINDS = ("nav_goal", "motion", "query", "stop", "unknown")
QUERY_KINDS = ("position", "travel_distance", "visible_objects", "status")
UNKNOWN_LABEL = "unknown"

DEFAULT_BACKEND_TIMEOUT = 5.0
DEFAULT_STALENESS_BUDGET = 1.0

_TOKEN_RE = re.compile(r"[a-z0-9]+")


class GrammarError(ValueError):
    """Grammar file failed to load or validate."""


@dataclass(frozen=True)
class Utterance:
    raw: str
    tokens: tuple[str, ...]
    stamp: float = 0.0

    @property
    def text(self) -> str:
        return " ".join(self.tokens)


def normalize(raw: str, stamp: float = 0.0) -> Utterance:
    """Lowercase, strip punctuation, tokenize.  Idempotent."""
    tokens = tuple(_TOKEN_RE.findall(raw.lower()))
    return Utterance(raw=raw, tokens=tokens, stamp=stamp)


@dataclass
class Intent:
    kind: str
    confidence: float = 0.0
    matched_label: str = UNKNOWN_LABEL
    destination: Optional[str] = None
    unresolved: bool = False
    pattern: Optional[str] = None
    query: Optional[str] = None
    record_id: Optional[int] = None

    def __post_init__(self) -> None:
        if self.kind not in INTENT_KINDS:
            raise ValueError(f"invalid intent kind {self.kind!r}")

    def to_payload(self) -> dict:
        return {
            "kind": self.kind,
            "confidence": self.confidence,
            "matched_label": self.matched_label,
            "destination": self.destination,
            "unresolved": self.unresolved,
            "pattern": self.pattern,
            "query": self.query,
            "record_id": self.record_id,
        }

    @classmethod
    def from_payload(cls, payload: dict) -> "Intent":
        return cls(**{k: payload.get(k) for k in (
            "kind", "confidence", "matched_label", "destination",
            "unresolved", "pattern", "query", "record_id")})


@dataclass
class GrammarEntry:
    label: str
    kind: str
    patterns: list[str]
    synonyms: list[str] = field(default_factory=list)
    pattern: Optional[str] = None  # motion pattern name
    query: Optional[str] = None  # query kind


class IntentGrammar:
    """Phrase patterns (with optional {destination} slots) mapped to intents."""

    def __init__(self, entries: list[GrammarEntry]) -> None:
        self.entries = entries
        self.destinations: dict[str, str] = {}
        self._exact: dict[str, GrammarEntry] = {}
        self._slot: list[tuple[re.Pattern, GrammarEntry]] = []
        self._validate_and_compile()

    def _validate_and_compile(self) -> None:
        if not self.entries:
            raise GrammarError("grammar has no entries")
        seen = set()
        for entry in self.entries:
            if not entry.label:
                raise GrammarError("grammar entry with empty label")
            if entry.label in seen:
                raise GrammarError(f"duplicate grammar label {entry.label!r}")
            seen.add(entry.label)
            if entry.kind not in ("nav_goal", "motion", "query", "stop"):
                raise GrammarError(f"entry {entry.label!r} has invalid kind {entry.kind!r}")
            if entry.kind == "motion" and not entry.pattern:
                raise GrammarError(f"motion entry {entry.label!r} needs a pattern name")
            if entry.kind == "query" and entry.query not in QUERY_KINDS:
                raise GrammarError(f"query entry {entry.label!r} needs one of {QUERY_KINDS}")
            if not entry.patterns:
                raise GrammarError(f"entry {entry.label!r} has no phrase patterns")
            for phrase in entry.patterns:
                if "{destination}" in phrase:
                    if entry.kind != "nav_goal":
                        raise GrammarError(
                            f"{entry.label!r}: destination slot in non-navigation entry")
                    if phrase.count("{destination}") != 1:
                        raise GrammarError(f"pattern {phrase!r} must have one slot")
                    left, right = phrase.split("{destination}", 1)
                    lnorm, rnorm = normalize(left).text, normalize(right).text
                    regex = "^"
                    if lnorm:
                        regex += re.escape(lnorm) + " "
                    regex += r"(?P<destination>.+)"
                    if rnorm:
                        regex += " " + re.escape(rnorm)
                    regex += "$"
                    try:
                        self._slot.append((re.compile(regex), entry))
                    except re.error as exc:
                        raise GrammarError(f"pattern {phrase!r} failed to compile: {exc}")
                else:
                    self._exact[normalize(phrase).text] = entry
            for syn in entry.synonyms:
                self._exact.setdefault(normalize(syn).text, entry)

    def labels(self) -> list[str]:
        return [e.label for e in self.entries]

    def attach_destinations(self, alias_map: dict[str, str]) -> None:
        """Phrase -> location label map (normalized keys), usually from the
        location registry."""
        self.destinations = {normalize(k).text: v for k, v in alias_map.items()}

    def resolve_destination(self, phrase: str) -> tuple[str, bool]:
        """(label, unresolved).  Unknown phrases become snake_case labels
        flagged unresolved."""
        norm = normalize(phrase)
        label = self.destinations.get(norm.text)
        if label is not None:
            return label, False
        return "_".join(norm.tokens), True

    def match_exact(self, utt: Utterance) -> Optional[GrammarEntry]:
        return self._exact.get(utt.text)

    def match_slot(self, utt: Utterance) -> Optional[tuple[GrammarEntry, str]]:
        for regex, entry in self._slot:
            m = regex.match(utt.text)
            if m:
                return entry, m.group("destination")
        return None

    def entry_by_label(self, label: str) -> Optional[GrammarEntry]:
        for entry in self.entries:
            if entry.label == label:
                return entry
        return None


def load_grammar(path: str | Path) -> IntentGrammar:
    path = Path(path)
    try:
        doc = yaml.safe_load(path.read_text())
    except (OSError, yaml.YAMLError) as exc:
        raise GrammarError(f"cannot load grammar {path}: {exc}") from exc
    if not isinstance(doc, dict) or not isinstance(doc.get("entries"), list):
        raise GrammarError(f"grammar {path} needs an 'entries' list")
    entries = []
    for spec in doc["entries"]:
        entries.append(GrammarEntry(
            label=str(spec.get("label", "")),
            kind=str(spec.get("kind", "")),
            patterns=[str(p) for p in spec.get("patterns", [])],
            synonyms=[str(s) for s in spec.get("synonyms", [])],
            pattern=spec.get("pattern"),
            query=spec.get("query"),
        ))
    return IntentGrammar(entries)


@dataclass
class BackendResult:
    label: Optional[str]
    confidence: float
    raw: str
    latency: float = 0.0


class LmBackend(Protocol):
    def interpret(self, utt: Utterance) -> BackendResult: ...


class RuleBackend:
    """Deterministic offline backend: token-subset matching against the
    grammar's slot-free phrases, preferring the most specific match."""

    def __init__(self, grammar: IntentGrammar) -> None:
        self._candidates: list[tuple[frozenset, int, GrammarEntry]] = []
        for entry in grammar.entries:
            for phrase in entry.patterns + entry.synonyms:
                if "{destination}" in phrase:
                    continue
                tokens = normalize(phrase).tokens
                if tokens:
                    self._candidates.append((frozenset(tokens), len(tokens), entry))

    def interpret(self, utt: Utterance) -> BackendResult:
        tokens = set(utt.tokens)
        best: Optional[tuple[int, GrammarEntry]] = None
        for token_set, size, entry in self._candidates:
            if token_set <= tokens and (best is None or size > best[0]):
                best = (size, entry)
        if best is None:
            return BackendResult(label=None, confidence=0.0, raw="rule:no-match")
        return BackendResult(label=best[1].label, confidence=1.0,
                             raw=f"rule:{best[1].label}")


class HttpLmBackend:
    """Client for an external completion endpoint.

    Sends the utterance wrapped in the prompt template as JSON, extracts a
    completion string from the response, and pattern-matches it against the
    known labels.  Every failure mode (network, timeout, parse) degrades to
    no-candidate; the node never crashes on backend trouble.
    """

    def __init__(self, endpoint: str, prompt_template: str = "{utterance}",
                 timeout: float = DEFAULT_BACKEND_TIMEOUT,
                 headers: Optional[dict] = None,
                 labels: Optional[list[str]] = None) -> None:
        self.endpoint = endpoint
        self.prompt_template = prompt_template
        self.timeout = timeout
        self.headers = headers or {}
        self.labels = labels or []

    def _extract_completion(self, data) -> Optional[str]:
        if isinstance(data, str):
            return data
        if not isinstance(data, dict):
            return None
        for key in ("completion", "text", "label", "output", "response"):
            if isinstance(data.get(key), str):
                return data[key]
        choices = data.get("choices")
        if isinstance(choices, list) and choices:
            first = choices[0]
            if isinstance(first, dict):
                if isinstance(first.get("text"), str):
                    return first["text"]
                message = first.get("message")
                if isinstance(message, dict) and isinstance(message.get("content"), str):
                    return message["content"]
        return None

    def _match_label(self, completion: str) -> Optional[str]:
        tokens = normalize(completion).tokens
        for label in self.labels:
            words = normalize(label.replace("_", " ")).tokens
            n = len(words)
            if n and any(tuple(tokens[i:i + n]) == words
                         for i in range(len(tokens) - n + 1)):
                return label
        return None

    def interpret(self, utt: Utterance) -> BackendResult:
        prompt = self.prompt_template.replace("{utterance}", utt.raw)
        t0 = time.perf_counter()
        try:
            resp = requests.post(self.endpoint, json={"prompt": prompt},
                                 headers=self.headers, timeout=self.timeout)
            resp.raise_for_status()
            data = resp.json()
        except requests.RequestException as exc:
            return BackendResult(label=None, confidence=0.0,
                                 raw=f"http-error:{exc.__class__.__name__}",
                                 latency=time.perf_counter() - t0)
        except ValueError:
            return BackendResult(label=None, confidence=0.0, raw="http-error:bad-json",
                                 latency=time.perf_counter() - t0)
        latency = time.perf_counter() - t0
        completion = self._extract_completion(data)
        if completion is None:
            return BackendResult(label=None, confidence=0.0,
                                 raw="http-error:no-completion", latency=latency)
        label = self._match_label(completion)
        if label is None:
            return BackendResult(label=None, confidence=0.0, raw=completion,
                                 latency=latency)
        confidence = data.get("confidence", 1.0) if isinstance(data, dict) else 1.0
        return BackendResult(label=label, confidence=float(confidence),
                             raw=completion, latency=latency)


def _intent_from_entry(entry: GrammarEntry, grammar: IntentGrammar,
                       confidence: float,
                       destination_phrase: Optional[str] = None) -> Intent:
    if entry.kind == "nav_goal":
        if destination_phrase is None:
            return Intent(kind="nav_goal", confidence=confidence,
                          matched_label=entry.label, destination=None, unresolved=True)
        label, unresolved = grammar.resolve_destination(destination_phrase)
        return Intent(kind="nav_goal", confidence=confidence,
                      matched_label=entry.label, destination=label,
                      unresolved=unresolved)
    if entry.kind == "motion":
        return Intent(kind="motion", confidence=confidence,
                      matched_label=entry.label, pattern=entry.pattern)
    if entry.kind == "query":
        return Intent(kind="query", confidence=confidence,
                      matched_label=entry.label, query=entry.query)
    return Intent(kind="stop", confidence=confidence, matched_label=entry.label)


def decode_with_trace(utt: Utterance, grammar: IntentGrammar,
                      backend: LmBackend) -> tuple[Intent, Optional[BackendResult]]:
    entry = grammar.match_exact(utt)
    if entry is not None:
        return _intent_from_entry(entry, grammar, 1.0), None

    slot = grammar.match_slot(utt)
    if slot is not None:
        entry, phrase = slot
        return _intent_from_entry(entry, grammar, 1.0, destination_phrase=phrase), None

    try:
        result = backend.interpret(utt)
    except Exception as exc:  # backend contract is total; enforce it anyway
        result = BackendResult(label=None, confidence=0.0,
                               raw=f"backend-error:{exc.__class__.__name__}")
    if result.label is not None:
        entry = grammar.entry_by_label(result.label)
        if entry is not None:
            return _intent_from_entry(entry, grammar, result.confidence), result
    return Intent(kind="unknown", confidence=0.0, matched_label=UNKNOWN_LABEL), result


def decode(utt: Utterance, grammar: IntentGrammar, backend: LmBackend) -> Intent:
    """Total mapping from utterance to intent; Unknown when nothing matches."""
    return decode_with_trace(utt, grammar, backend)[0]


def answer_query(intent: Intent, snapshot: Optional[SensorSnapshot],
                 detections: list[dict], now: float,
                 nav_state: Optional[str] = None,
                 staleness_budget: float = DEFAULT_STALENESS_BUDGET) -> str:
    """Deterministic template rendering over the latest sensor data."""
    if snapshot is None:
        return "I have no sensor data yet."
    if now - snapshot.stamp > staleness_budget:
        return "My sensor data is stale; please try again in a moment."

    x, y, theta = snapshot.pose
    if intent.query == "position":
        return f"I am at x={x:.2f}, y={y:.2f}."
    if intent.query == "travel_distance":
        return f"I have traveled {snapshot.odom_distance:.2f} m so far."
    if intent.query == "visible_objects":
        if not detections:
            return "I do not see any objects right now."
        parts = [f"{d['label']} at ({d['x']:.2f}, {d['y']:.2f})" for d in detections]
        return "I can see " + ", ".join(parts) + "."
    if intent.query == "status":
        state = nav_state or "idle"
        return (f"Status: {state}. Position x={x:.2f}, y={y:.2f}, "
                f"heading {theta:.2f} rad, {snapshot.odom_distance:.2f} m traveled.")
    return "I cannot answer that."


@dataclass
class InteractionRecord:
    """One logged exchange; field names match the JSON-lines log schema."""

    id: int
    input_text: str
    predicted_label: str
    intent_kind: str
    lm_output: Optional[str] = None
    true_label: Optional[str] = None
    gui_sent: Optional[float] = None
    node_received: Optional[float] = None
    action_started: Optional[float] = None
    action_ended: Optional[float] = None
    nav_success: Optional[bool] = None
    nav_state: Optional[str] = None
    detection_correct: Optional[bool] = None
    lm_latency: Optional[float] = None

    def to_payload(self) -> dict:
        return {
            "id": self.id,
            "input_text": self.input_text,
            "lm_output": self.lm_output,
            "predicted_label": self.predicted_label,
            "true_label": self.true_label,
            "intent_kind": self.intent_kind,
            "stamps": {
                "gui_sent": self.gui_sent,
                "node_received": self.node_received,
                "action_started": self.action_started,
                "action_ended": self.action_ended,
            },
            "outcome": {
                "nav_success": self.nav_success,
                "nav_state": self.nav_state,
                "detection_correct": self.detection_correct,
            },
            "lm_latency": self.lm_latency,
        }

    @classmethod
    def from_payload(cls, payload: dict) -> "InteractionRecord":
        stamps = payload.get("stamps", {})
        outcome = payload.get("outcome", {})
        return cls(
            id=payload["id"],
            input_text=payload["input_text"],
            predicted_label=payload["predicted_label"],
            intent_kind=payload["intent_kind"],
            lm_output=payload.get("lm_output"),
            true_label=payload.get("true_label"),
            gui_sent=stamps.get("gui_sent"),
            node_received=stamps.get("node_received"),
            action_started=stamps.get("action_started"),
            action_ended=stamps.get("action_ended"),
            nav_success=outcome.get("nav_success"),
            nav_state=outcome.get("nav_state"),
            detection_correct=outcome.get("detection_correct"),
            lm_latency=payload.get("lm_latency"),
        )

    def check_stamps(self) -> None:
        ordered = [s for s in (self.gui_sent, self.node_received,
                               self.action_started, self.action_ended)
                   if s is not None]
        for a, b in zip(ordered, ordered[1:]):
            if b < a:
                raise ValueError(f"record {self.id} has decreasing stamps")


_FEEDBACK = {
    "stop": "Stopping.",
    "unknown": "Sorry, I did not understand that. Stopping for safety.",
}


class NluNode:
    """Sequential decode pipeline over chat/in.

    Queries are answered inline from cached sensor data; actionable intents
    are forwarded on the intent topic for dispatch.  Every inbound message
    produces exactly one interaction record and at least one chat/out reply.
    """

    def __init__(self, bus, grammar: IntentGrammar, backend: LmBackend,
                 staleness_budget: float = DEFAULT_STALENESS_BUDGET) -> None:
        self.bus = bus
        self.grammar = grammar
        self.backend = backend
        self.staleness_budget = staleness_budget
        self._chat_sub = bus.subscribe("chat/in")
        self._sensor_sub = bus.subscribe("sensors")
        self._det_sub = bus.subscribe("detections")
        self._nav_sub = bus.subscribe("nav/status")
        self._snapshot: Optional[SensorSnapshot] = None
        self._detections: list[dict] = []
        self._nav_state: Optional[str] = None

    def _refresh_caches(self) -> None:
        env = self._sensor_sub.latest()
        if env is not None:
            self._snapshot = SensorSnapshot.from_payload(env.payload, stamp=env.stamp)
        env = self._det_sub.latest()
        if env is not None:
            self._detections = env.payload
        env = self._nav_sub.latest()
        if env is not None:
            self._nav_state = env.payload["state"]

    def tick(self) -> int:
        """Handle every queued chat message; returns how many were handled."""
        self._refresh_caches()
        handled = 0
        while True:
            env = self._chat_sub.get_nowait()
            if env is None:
                return handled
            self.handle(env)
            handled += 1

    def handle(self, env) -> InteractionRecord:
        received = self.bus.clock.now()
        text = env.payload["text"]
        utt = normalize(text, stamp=env.stamp)
        intent, trace = decode_with_trace(utt, self.grammar, self.backend)
        intent.record_id = env.seq

        record = InteractionRecord(
            id=env.seq,
            input_text=text,
            predicted_label=intent.matched_label,
            intent_kind=intent.kind,
            lm_output=trace.raw if trace else None,
            true_label=env.payload.get("true_label"),
            gui_sent=env.stamp,
            node_received=received,
            lm_latency=trace.latency if trace else None,
        )

        if intent.kind == "query":
            reply = answer_query(intent, self._snapshot, self._detections,
                                 self.bus.clock.now(), self._nav_state,
                                 self.staleness_budget)
            out = self.bus.publish("chat/out", {"text": reply, "reply_to": env.seq})
            record.action_started = out.stamp
            record.action_ended = out.stamp
        else:
            self.bus.publish("intent", intent.to_payload())
            if intent.kind == "nav_goal":
                if intent.unresolved:
                    reply = f"I do not know the location '{intent.destination}'."
                else:
                    reply = f"Navigating to {intent.destination}."
            elif intent.kind == "motion":
                reply = f"Executing {intent.pattern} pattern."
            else:
                reply = _FEEDBACK[intent.kind]
            self.bus.publish("chat/out", {"text": reply, "reply_to": env.seq})

        self.bus.publish("log/interaction", record.to_payload())
        return record

"""Topic-based publish/subscribe bus connecting the nodes.

Semantics mirror default ROS topics: per-topic FIFO, fan-out to every
subscriber, no replay of messages published before a subscription existed.
Topics are created lazily on first publish or subscribe.  Per-subscriber
queues are bounded; on overflow the oldest message is dropped and a counter
is reported on the ``diag`` topic so a stalled consumer never wedges the
control loop.
"""

from __future__ import annotations

import threading
from collections import deque
from dataclasses import dataclass
from typing import Any, Callable, Iterator, Optional

from .clock import WallClock

DEFAULT_QUEUE_SIZE = 1024

NAV_STATES = ("pending", "active", "succeeded", "aborted", "timed_out")


class SchemaError(ValueError):
    """Payload does not match the schema documented for its topic."""


@dataclass(frozen=True)
class Envelope:
    topic: str
    seq: int
    stamp: float
    payload: Any


def _require(cond: bool, msg: str) -> None:
    if not cond:
        raise SchemaError(msg)


def _check_text(payload: Any) -> None:
    _require(isinstance(payload, dict), "chat payload must be an object")
    _require(isinstance(payload.get("text"), str), "chat payload needs a 'text' string")


def _check_vec3(value: Any, name: str) -> None:
    _require(
        isinstance(value, (list, tuple))
        and len(value) == 3
        and all(isinstance(v, (int, float)) for v in value),
        f"{name} must be a list of 3 numbers",
    )


def _check_twist(payload: Any) -> None:
    _require(isinstance(payload, dict), "twist payload must be an object")
    _check_vec3(payload.get("linear"), "linear")
    _check_vec3(payload.get("angular"), "angular")


def _check_pose(payload: Any) -> None:
    _require(isinstance(payload, dict), "pose payload must be an object")
    for key in ("x", "y", "theta"):
        _require(isinstance(payload.get(key), (int, float)), f"pose needs numeric '{key}'")


def _check_detections(payload: Any) -> None:
    _require(isinstance(payload, list), "detections payload must be a list")
    for det in payload:
        _require(isinstance(det, dict), "detection must be an object")
        _require(isinstance(det.get("label"), str), "detection needs a 'label' string")
        for key in ("score", "x", "y", "stamp"):
            _require(isinstance(det.get(key), (int, float)), f"detection needs numeric '{key}'")


def _check_nav_status(payload: Any) -> None:
    _require(isinstance(payload, dict), "nav status payload must be an object")
    _require(payload.get("state") in NAV_STATES, f"nav state must be one of {NAV_STATES}")


def _check_interaction(payload: Any) -> None:
    _require(isinstance(payload, dict), "interaction record must be an object")
    for key in ("input_text", "predicted_label", "intent_kind"):
        _require(isinstance(payload.get(key), str), f"interaction record needs '{key}'")
    _require(isinstance(payload.get("stamps"), dict), "interaction record needs 'stamps'")
    _require(isinstance(payload.get("outcome"), dict), "interaction record needs 'outcome'")


def _check_dispatch_event(payload: Any) -> None:
    _require(isinstance(payload, dict), "dispatch event must be an object")
    _require(isinstance(payload.get("record_id"), int), "dispatch event needs 'record_id'")
    _require(payload.get("event") in ("started", "ended"), "dispatch event must be started/ended")


def _check_intent(payload: Any) -> None:
    _require(isinstance(payload, dict), "intent payload must be an object")
    _require(isinstance(payload.get("kind"), str), "intent needs a 'kind'")


def _check_sensors(payload: Any) -> None:
    _require(isinstance(payload, dict), "sensor payload must be an object")
    _check_pose(payload.get("pose"))
    _require(isinstance(payload.get("scan"), list), "sensor payload needs 'scan'")
    _require(isinstance(payload.get("visible"), list), "sensor payload needs 'visible'")
    _require(
        isinstance(payload.get("odom_distance"), (int, float)),
        "sensor payload needs 'odom_distance'",
    )


TOPIC_SCHEMAS: dict[str, Callable[[Any], None]] = {
    "chat/in": _check_text,
    "chat/out": _check_text,
    "cmd_vel": _check_twist,
    "pose": _check_pose,
    "sensors": _check_sensors,
    "detections": _check_detections,
    "nav/status": _check_nav_status,
    "intent": _check_intent,
    "log/interaction": _check_interaction,
    "log/dispatch": _check_dispatch_event,
}


class Subscription:
    """FIFO view of one topic, fed by the bus from the subscription instant on."""

    def __init__(self, bus: "Bus", topic: str, maxlen: int) -> None:
        self._bus = bus
        self.topic = topic
        self._queue: deque[Envelope] = deque()
        self._maxlen = maxlen
        self._cond = threading.Condition()
        self._closed = False
        self.dropped = 0

    def _offer(self, env: Envelope) -> bool:
        """Enqueue; returns False when the oldest message had to be dropped."""
        with self._cond:
            if self._closed:
                return True
            overflow = len(self._queue) >= self._maxlen
            if overflow:
                self._queue.popleft()
                self.dropped += 1
            self._queue.append(env)
            self._cond.notify()
            return not overflow

    def get(self, timeout: Optional[float] = None) -> Optional[Envelope]:
        """Next envelope, or None on timeout / closed-and-drained."""
        with self._cond:
            if not self._queue:
                if self._closed:
                    return None
                self._cond.wait(timeout)
            if self._queue:
                return self._queue.popleft()
            return None

    def get_nowait(self) -> Optional[Envelope]:
        with self._cond:
            if self._queue:
                return self._queue.popleft()
            return None

    def drain(self) -> list[Envelope]:
        """All currently queued envelopes, oldest first."""
        with self._cond:
            out = list(self._queue)
            self._queue.clear()
            return out

    def latest(self) -> Optional[Envelope]:
        """Newest queued envelope, discarding anything older."""
        with self._cond:
            if not self._queue:
                return None
            env = self._queue[-1]
            self._queue.clear()
            return env

    def close(self) -> None:
        with self._cond:
            self._closed = True
            self._cond.notify_all()
        self._bus._unsubscribe(self)

    def __iter__(self) -> Iterator[Envelope]:
        while True:
            env = self.get()
            if env is None and self._closed:
                return
            if env is not None:
                yield env


class _TopicState:
    __slots__ = ("name", "seq", "last_stamp", "subscribers")

    def __init__(self, name: str) -> None:
        self.name = name
        self.seq = 0
        self.last_stamp = 0.0
        self.subscribers: list[Subscription] = []


class Bus:
    """Thread-safe in-process pub/sub fabric.

    Delivery order is guaranteed per topic, not across topics.  The clock is
    injectable so tests can stamp envelopes deterministically.
    """

    def __init__(self, clock=None, queue_size: int = DEFAULT_QUEUE_SIZE,
                 validate: bool = True) -> None:
        self.clock = clock if clock is not None else WallClock()
        self._queue_size = queue_size
        self._validate = validate
        self._topics: dict[str, _TopicState] = {}
        self._lock = threading.RLock()
        self.dropped_total = 0

    def _topic(self, name: str) -> _TopicState:
        if not name:
            raise ValueError("topic name must be non-empty")
        state = self._topics.get(name)
        if state is None:
            state = _TopicState(name)
            self._topics[name] = state
        return state

    def topics(self) -> list[str]:
        with self._lock:
            return sorted(self._topics)

    def publish(self, topic: str, payload: Any) -> Envelope:
        if self._validate:
            check = TOPIC_SCHEMAS.get(topic)
            if check is not None:
                check(payload)
        with self._lock:
            state = self._topic(topic)
            state.seq += 1
            stamp = self.clock.now()
            # Monotonic clocks can still tie; never let a stamp regress.
            if stamp < state.last_stamp:
                stamp = state.last_stamp
            state.last_stamp = stamp
            env = Envelope(topic=topic, seq=state.seq, stamp=stamp, payload=payload)
            overflowed = False
            for sub in list(state.subscribers):
                if not sub._offer(env):
                    overflowed = True
                    self.dropped_total += 1
        if overflowed and topic != "diag":
            self.publish("diag", {"event": "queue_overflow", "topic": topic,
                                  "dropped_total": self.dropped_total})
        return env

    def subscribe(self, topic: str, queue_size: Optional[int] = None) -> Subscription:
        with self._lock:
            state = self._topic(topic)
            sub = Subscription(self, topic, queue_size or self._queue_size)
            state.subscribers.append(sub)
            return sub

    def _unsubscribe(self, sub: Subscription) -> None:
        with self._lock:
            state = self._topics.get(sub.topic)
            if state and sub in state.subscribers:
                state.subscribers.remove(sub)

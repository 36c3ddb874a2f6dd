import threading

import pytest

from chatnav.bus import Bus, SchemaError
from chatnav.clock import FakeClock


def test_new_bus_is_empty():
    bus = Bus()
    assert bus.topics() == []


def test_publish_auto_creates_topic():
    bus = Bus()
    bus.publish("chat/out", {"text": "Moving forward"})
    assert bus.topics() == ["chat/out"]


def test_buses_are_isolated():
    a, b = Bus(), Bus()
    sub = b.subscribe("chat/out")
    a.publish("chat/out", {"text": "hi"})
    assert sub.get_nowait() is None


def test_single_delivery_to_one_subscriber():
    bus = Bus()
    sub = bus.subscribe("chat/out")
    bus.publish("chat/out", {"text": "Moving forward"})
    envs = sub.drain()
    assert len(envs) == 1
    assert envs[0].payload["text"] == "Moving forward"


def test_per_topic_fifo_order():
    bus = Bus()
    sub = bus.subscribe("pose")
    bus.publish("pose", {"x": 1.0, "y": 0.0, "theta": 0.0})
    bus.publish("pose", {"x": 2.0, "y": 0.0, "theta": 0.0})
    xs = [env.payload["x"] for env in sub.drain()]
    assert xs == [1.0, 2.0]


def test_publish_without_subscribers_is_fire_and_forget():
    bus = Bus()
    env = bus.publish("chat/out", {"text": "nobody listening"})
    assert env.seq == 1


def test_no_replay_for_late_subscriber():
    bus = Bus()
    bus.publish("chat/out", {"text": "early"})
    sub = bus.subscribe("chat/out")
    assert sub.get_nowait() is None
    bus.publish("chat/out", {"text": "late"})
    assert sub.get_nowait().payload["text"] == "late"


def test_fan_out_to_all_subscribers():
    bus = Bus()
    subs = [bus.subscribe("chat/out") for _ in range(3)]
    bus.publish("chat/out", {"text": "one"})
    bus.publish("chat/out", {"text": "two"})
    for sub in subs:
        assert [e.payload["text"] for e in sub.drain()] == ["one", "two"]


def test_exactly_once_n_by_m():
    bus = Bus()
    subs = [bus.subscribe("t") for _ in range(4)]
    for i in range(25):
        bus.publish("t", i)
    total = sum(len(sub.drain()) for sub in subs)
    assert total == 25 * 4


def test_topic_isolation():
    bus = Bus()
    sub = bus.subscribe("a")
    bus.publish("b", "for b only")
    assert sub.get_nowait() is None


def test_seq_strictly_increasing_per_topic():
    bus = Bus()
    sub = bus.subscribe("t")
    for i in range(10):
        bus.publish("t", i)
    seqs = [e.seq for e in sub.drain()]
    assert seqs == sorted(seqs)
    assert len(set(seqs)) == len(seqs)


def test_stamps_come_from_injected_clock():
    clock = FakeClock(start=100.0)
    bus = Bus(clock=clock)
    env1 = bus.publish("t", 1)
    clock.advance(2.5)
    env2 = bus.publish("t", 2)
    assert env1.stamp == 100.0
    assert env2.stamp == 102.5


def test_stamps_non_decreasing():
    bus = Bus()
    stamps = [bus.publish("t", i).stamp for i in range(50)]
    assert all(b >= a for a, b in zip(stamps, stamps[1:]))


def test_schema_rejects_bad_chat_payload():
    bus = Bus()
    with pytest.raises(SchemaError):
        bus.publish("chat/in", {"wrong": "shape"})
    with pytest.raises(SchemaError):
        bus.publish("chat/in", "bare string")


def test_schema_rejects_bad_twist():
    bus = Bus()
    with pytest.raises(SchemaError):
        bus.publish("cmd_vel", {"linear": [0, 0], "angular": [0, 0, 0]})


def test_schema_rejects_bad_nav_state():
    bus = Bus()
    with pytest.raises(SchemaError):
        bus.publish("nav/status", {"state": "confused"})


def test_unknown_topics_accept_any_payload():
    bus = Bus()
    bus.publish("custom/topic", object())


def test_queue_overflow_drops_oldest_and_reports_on_diag():
    bus = Bus(queue_size=8)
    diag = bus.subscribe("diag")
    sub = bus.subscribe("t", queue_size=8)
    for i in range(12):
        bus.publish("t", i)
    payloads = [e.payload for e in sub.drain()]
    assert payloads == list(range(4, 12))  # oldest 4 dropped
    assert sub.dropped == 4
    assert bus.dropped_total == 4
    diag_msgs = diag.drain()
    assert diag_msgs and diag_msgs[-1].payload["topic"] == "t"


def test_subscription_close_stops_delivery():
    bus = Bus()
    sub = bus.subscribe("t")
    sub.close()
    bus.publish("t", 1)
    assert sub.get_nowait() is None


def test_concurrent_publishers_keep_per_topic_fifo():
    bus = Bus()
    sub = bus.subscribe("t")
    other = bus.subscribe("other")

    def worker(tag):
        for i in range(250):
            bus.publish("t", {"tag": tag, "i": i})

    threads = [threading.Thread(target=worker, args=(t,)) for t in range(4)]
    for t in threads:
        t.start()
    for t in threads:
        t.join()

    envs = sub.drain()
    assert len(envs) == 1000
    seqs = [e.seq for e in envs]
    assert seqs == sorted(seqs) and len(set(seqs)) == 1000
    # per-publisher payload order preserved within the interleaving
    for tag in range(4):
        order = [e.payload["i"] for e in envs if e.payload["tag"] == tag]
        assert order == list(range(250))
    assert other.get_nowait() is None


def test_blocking_get_with_timeout():
    bus = Bus()
    sub = bus.subscribe("t")
    assert sub.get(timeout=0.01) is None
    bus.publish("t", 42)
    env = sub.get(timeout=0.5)
    assert env.payload == 42

"""Seeded message bus: latency, ordering, silencing, logging."""

from midastouch.bus import MessageBus


def test_latency_within_bounds_and_seeded():
    a = MessageBus(seed=7)
    b = MessageBus(seed=7)
    c = MessageBus(seed=8)
    da = a.send("x", "y", "hello")
    db = b.send("x", "y", "hello")
    dc = c.send("x", "y", "hello")
    assert da.arrives_at == db.arrives_at
    assert da.arrives_at != dc.arrives_at
    assert 0.01 <= da.arrives_at - da.sent_at <= 0.1


def test_pop_orders_by_arrival_time():
    bus = MessageBus(seed=0)
    sent = [bus.send("s", f"r{i}", i) for i in range(20)]
    arrived = list(bus.drain())
    times = [d.arrives_at for d in arrived]
    assert times == sorted(times)
    assert {d.payload for d in arrived} == {d.payload for d in sent}


def test_clock_advances_with_pops():
    bus = MessageBus(seed=0)
    bus.send("s", "r", 1)
    bus.send("s", "r", 2)
    assert bus.clock == 0.0
    first = bus.pop()
    assert bus.clock == first.arrives_at
    second = bus.pop()
    assert bus.clock == second.arrives_at >= first.arrives_at
    assert bus.pop() is None


def test_broadcast_skips_sender():
    bus = MessageBus(seed=0)
    count = bus.broadcast("a", ["a", "b", "c"], "ping")
    assert count == 2
    recipients = {d.recipient for d in bus.drain()}
    assert recipients == {"b", "c"}


def test_silenced_node_sends_nothing():
    bus = MessageBus(seed=0)
    bus.silence("mute")
    assert bus.send("mute", "r", "x") is None
    bus.send("loud", "r", "y")
    assert bus.sent_count == 1
    assert bus.pending() == 1
    # dropped sends never reach the log either
    assert all(d.sender != "mute" for d in bus.log())


def test_log_keeps_send_order():
    bus = MessageBus(seed=3)
    for i in range(10):
        bus.send("s", "r", i)
    assert [d.payload for d in bus.log()] == list(range(10))
    assert [d.seq for d in bus.log()] == sorted(d.seq for d in bus.log())


def test_log_is_a_copy():
    bus = MessageBus(seed=0)
    bus.send("s", "r", 1)
    bus.log().clear()
    assert len(bus.log()) == 1

import json

import numpy as np
import pytest

from mpctree.runtime import (
    CapExceeded,
    ClusterConfig,
    DuplicateSequence,
    Message,
    NonTermination,
    SimResult,
    linear_capacity,
    measure_words,
    metrics_json,
    parse_metrics_json,
    polylog_capacity,
    run_simulation,
)


class Echo:
    """Does nothing; every machine is idle from round one."""

    def setup(self, machine_id, m, shard, config):
        return {"shard": shard}

    def step(self, ctx):
        ctx.finish()

    def output(self, machine_id, state):
        return state["shard"]


class AllToOne:
    """Every machine sends one word to machine 0."""

    def setup(self, machine_id, m, shard, config):
        return {"got": 0}

    def step(self, ctx):
        if ctx.round == 1 and ctx.machine_id != 0:
            ctx.send(0, ctx.machine_id)
        for msg in ctx.inbox:
            ctx.state["got"] += 1
        ctx.finish()

    def output(self, machine_id, state):
        return state["got"]


class Broadcaster:
    def setup(self, machine_id, m, shard, config):
        return {"seen": []}

    def step(self, ctx):
        if ctx.round == 1 and ctx.machine_id == 0:
            ctx.broadcast("hi")
        for msg in ctx.inbox:
            ctx.state["seen"].append((msg.sender, msg.payload))
        ctx.finish()

    def output(self, machine_id, state):
        return state["seen"]


def cfg(m=4, words=1 << 20, **kw):
    return ClusterConfig(machines=m, words=words, **kw)


def shards(m):
    return [0] * m


def test_echo_runs_one_round():
    res = run_simulation(Echo(), cfg(), shards(4))
    assert res.rounds == 1
    assert res.outputs == [0, 0, 0, 0]


def test_all_to_one_metrics():
    res = run_simulation(AllToOne(), cfg(m=4), shards(4))
    assert res.rounds == 2
    assert res.outputs[0] == 3
    assert max(r.max_received for r in res.metrics) == 3
    assert res.metrics[0].total_moved == 3
    assert res.metrics[1].total_moved == 0


def test_broadcast_charges_m_messages():
    res = run_simulation(Broadcaster(), cfg(m=4), shards(4))
    assert res.metrics[0].max_sent == 4
    for out in res.outputs:
        assert out == [(0, "hi")]


def test_inbox_sorted_by_sender_then_sequence():
    class Spray:
        def setup(self, machine_id, m, shard, config):
            return {"log": None}

        def step(self, ctx):
            if ctx.round == 1 and ctx.machine_id != 0:
                # two messages per sender, sequences increase per sender
                ctx.send(0, f"{ctx.machine_id}a")
                ctx.send(0, f"{ctx.machine_id}b")
            if ctx.round == 2 and ctx.machine_id == 0:
                ctx.state["log"] = [(m.sender, m.sequence, m.payload) for m in ctx.inbox]
            ctx.finish()

        def output(self, machine_id, state):
            return state["log"]

    res = run_simulation(Spray(), cfg(m=4), shards(4))
    log = res.outputs[0]
    assert [p for (_, _, p) in log] == ["1a", "1b", "2a", "2b", "3a", "3b"]
    assert log == sorted(log, key=lambda t: (t[0], t[1]))


def test_received_cap_enforced():
    class Pile:
        def setup(self, machine_id, m, shard, config):
            return {}

        def step(self, ctx):
            if ctx.round == 1 and ctx.machine_id != 0:
                ctx.send(0, np.zeros(2, dtype=np.int64))
            ctx.finish()

        def output(self, machine_id, state):
            return None

    with pytest.raises(CapExceeded) as ei:
        run_simulation(Pile(), cfg(m=4, words=4), shards(4))
    # three senders deliver 6 words to machine 0 against a 4-word budget
    assert ei.value.kind == "received"
    assert ei.value.machine == 0


def test_sent_cap_enforced():
    class Flood:
        def setup(self, machine_id, m, shard, config):
            return {}

        def step(self, ctx):
            if ctx.round == 1 and ctx.machine_id == 0:
                ctx.send(1, np.zeros(100, dtype=np.int64))
            ctx.finish()

        def output(self, machine_id, state):
            return None

    with pytest.raises(CapExceeded) as ei:
        run_simulation(Flood(), cfg(m=2, words=50), [0, 0])
    assert ei.value.kind == "sent"
    assert ei.value.machine == 0
    assert ei.value.round == 1


def test_resident_cap_at_setup():
    with pytest.raises(CapExceeded) as ei:
        run_simulation(Echo(), cfg(m=2, words=8), [np.zeros(9, dtype=np.int64), 0])
    assert ei.value.kind == "resident"
    assert ei.value.round == 0


def test_caps_can_be_disabled():
    res = run_simulation(Echo(), cfg(m=2, words=8, enforce_caps=False),
                         [np.zeros(9, dtype=np.int64), 0])
    assert res.rounds == 1


def test_nontermination_ceiling():
    class Chatter:
        def setup(self, machine_id, m, shard, config):
            return {}

        def step(self, ctx):
            ctx.send((ctx.machine_id + 1) % ctx.m, 1)

        def output(self, machine_id, state):
            return None

    with pytest.raises(NonTermination):
        run_simulation(Chatter(), cfg(m=2, round_ceiling=10), [0, 0])


def test_finish_is_not_sticky():
    class WakeUp:
        """Machine 1 goes idle, then is woken by late mail and reacts."""

        def setup(self, machine_id, m, shard, config):
            return {"woke": False}

        def step(self, ctx):
            if ctx.machine_id == 0:
                if ctx.round == 2:
                    ctx.send(1, "wake")
                if ctx.round >= 2:
                    ctx.finish()
            else:
                if any(m.payload == "wake" for m in ctx.inbox):
                    ctx.state["woke"] = True
                ctx.finish()

        def output(self, machine_id, state):
            return state["woke"]

    res = run_simulation(WakeUp(), cfg(m=2), [0, 0])
    assert res.outputs[1] is True
    assert res.rounds == 3


def test_duplicate_sequence_detected():
    from mpctree.runtime import validate_inbox

    ok = [Message(0, 1, "a", 0), Message(0, 1, "b", 1), Message(2, 1, "c", 0)]
    validate_inbox(ok, 1)
    assert [m.payload for m in ok] == ["a", "b", "c"]

    bad = [Message(0, 1, "a", 0), Message(0, 1, "b", 0)]
    with pytest.raises(DuplicateSequence):
        validate_inbox(bad, 1)


def test_measure_words_basics():
    assert measure_words(7) == 1
    assert measure_words(3.14) == 1
    assert measure_words(None) == 1
    assert measure_words("12345678") == 1
    assert measure_words("123456789") == 2
    assert measure_words((1, 2, 3)) == 3
    assert measure_words({1: (2, 3)}) == 3
    assert measure_words(np.zeros(10, dtype=np.int64)) == 10
    assert measure_words(np.zeros(10, dtype=np.int32)) == 5

    class Blob:
        def __words__(self):
            return 42

    assert measure_words(Blob()) == 42
    with pytest.raises(TypeError):
        measure_words(object())


def test_config_validation():
    with pytest.raises(ValueError):
        ClusterConfig(machines=3, words=100)
    with pytest.raises(ValueError):
        ClusterConfig(machines=1, words=100)
    with pytest.raises(ValueError):
        ClusterConfig(machines=8, words=4)


def test_capacity_defaults():
    assert polylog_capacity(1024, 4) == 8 * 256 * 100
    assert linear_capacity(64, 4, c=8) == pytest.approx(8 * (64 ** (4 / 3)) / 4 * 36, abs=1)
    assert polylog_capacity(1, 2) >= 2


def test_metrics_json_roundtrip():
    res = run_simulation(AllToOne(), cfg(m=4), shards(4))
    line = metrics_json(res.metrics)
    assert "\n" not in line
    doc = parse_metrics_json(line)
    assert doc["rounds"] == 2
    assert doc["per_round"][0]["max_received"] == 3
    with pytest.raises(ValueError):
        parse_metrics_json(json.dumps({"nope": 1}))


def test_runs_are_deterministic():
    r1 = run_simulation(AllToOne(), cfg(m=4, seed=7), shards(4))
    r2 = run_simulation(AllToOne(), cfg(m=4, seed=7), shards(4))
    assert metrics_json(r1.metrics) == metrics_json(r2.metrics)
    assert r1.outputs == r2.outputs

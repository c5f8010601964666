"""Deterministic round-synchronous simulator for a memory-capped cluster.

The model: ``m`` machines, each with space for ``s`` 64-bit words.  A run
proceeds in synchronous rounds.  In every round each machine reads the
messages delivered to it, updates its private state, and queues messages for
the next round.  Between rounds the runtime enforces three caps per machine:
resident state, total words sent, and total words received, each at most
``s`` words.  Everything is deterministic: machines are stepped in index
order, inboxes are sorted by (sender, sequence), and all randomness must come
from the run seed.

A program is any object with three methods::

    setup(machine_id, m, shard, config) -> state
    step(ctx)                 # ctx.state, ctx.inbox, ctx.round, ctx.send, ctx.finish
    output(machine_id, state) -> per-machine output

Termination: the run stops after a round in which every machine called
``ctx.finish()`` and no messages were sent.  ``finish`` is a per-round vote,
not a latch -- a machine that receives mail later simply keeps stepping.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np


class SimError(Exception):
    pass


class CapExceeded(SimError):
    """A machine went over its word budget.  kind is resident|sent|received."""

    def __init__(self, machine, round_index, kind, words, cap):
        self.machine = machine
        self.round = round_index
        self.kind = kind
        self.words = words
        self.cap = cap
        super().__init__(
            f"machine {machine} exceeded {kind} cap in round {round_index}: "
            f"{words} > {cap} words"
        )


class NonTermination(SimError):
    def __init__(self, rounds):
        self.rounds = rounds
        super().__init__(f"no quiescence after {rounds} rounds")


class DuplicateSequence(SimError):
    pass


@dataclass(frozen=True)
class ClusterConfig:
    """m machines with s words each.  m must be a power of two, 2 <= m <= s."""

    machines: int
    words: int
    enforce_caps: bool = True
    seed: int = 0
    round_ceiling: int | None = None

    def __post_init__(self):
        m = self.machines
        if m < 2 or (m & (m - 1)) != 0:
            raise ValueError(f"machine count must be a power of two >= 2, got {m}")
        if self.words < m:
            raise ValueError(f"need words >= machines, got {self.words} < {m}")


def polylog_capacity(n: int, m: int, c: int = 8) -> int:
    """Default word budget for the polylog-space problem class."""
    lg = math.log2(max(n, 2))
    return max(m, math.ceil(c * (n / m) * lg * lg))


def linear_capacity(n: int, m: int, c: int = 8) -> int:
    """Default word budget for the near-linear problem class (n^(4/3) total)."""
    lg = math.log2(max(n, 2))
    return max(m, math.ceil(c * (n ** (4 / 3) / m) * lg * lg))


# ---------------------------------------------------------------------------
# word accounting
# ---------------------------------------------------------------------------

def measure_words(obj) -> int:
    """Size of a value in 64-bit words.

    Scalars count 1, strings/bytes pack 8 bytes per word, numpy arrays charge
    their buffer, containers charge the sum of their members.  Objects can
    implement ``__words__`` to declare their own footprint.
    """
    if obj is None or isinstance(obj, (bool, int, float)):
        return 1
    if isinstance(obj, np.ndarray):
        return max(1, -(-obj.nbytes // 8))
    if isinstance(obj, (np.integer, np.floating, np.bool_)):
        return 1
    if isinstance(obj, (bytes, str)):
        raw = obj.encode() if isinstance(obj, str) else obj
        return max(1, -(-len(raw) // 8))
    if isinstance(obj, Fraction):
        return 2
    if isinstance(obj, (tuple, list, set, frozenset)):
        return sum(measure_words(x) for x in obj)
    if isinstance(obj, dict):
        return sum(measure_words(k) + measure_words(v) for k, v in obj.items())
    hook = getattr(obj, "__words__", None)
    if hook is not None:
        return hook() if callable(hook) else int(hook)
    raise TypeError(f"cannot measure words of {type(obj).__name__}")


@dataclass(frozen=True)
class Message:
    sender: int
    receiver: int
    payload: object
    sequence: int

    @property
    def words(self) -> int:
        return measure_words(self.payload)


@dataclass
class RoundMetrics:
    round: int
    max_resident: int
    max_sent: int
    max_received: int
    total_moved: int


def metrics_json(metrics: list[RoundMetrics]) -> str:
    """Single-line JSON document for a finished run."""
    doc = {
        "rounds": len(metrics),
        "per_round": [
            {
                "round": r.round,
                "max_resident": r.max_resident,
                "max_sent": r.max_sent,
                "max_received": r.max_received,
                "total_moved": r.total_moved,
            }
            for r in metrics
        ],
    }
    return json.dumps(doc, separators=(",", ":"))


def parse_metrics_json(text: str) -> dict:
    doc = json.loads(text)
    if "rounds" not in doc or "per_round" not in doc:
        raise ValueError("not a metrics document")
    return doc


# ---------------------------------------------------------------------------
# the machine-facing context
# ---------------------------------------------------------------------------

class MachineContext:
    """What one machine sees during one round."""

    __slots__ = ("machine_id", "m", "round", "state", "inbox", "config",
                 "_outbox", "_finished")

    def __init__(self, machine_id, m, round_index, state, inbox, config):
        self.machine_id = machine_id
        self.m = m
        self.round = round_index
        self.state = state
        self.inbox = inbox
        self.config = config
        self._outbox = []
        self._finished = False

    def send(self, dst: int, payload) -> None:
        if not (0 <= dst < self.m):
            raise ValueError(f"bad destination {dst}")
        self._outbox.append((dst, payload))

    def broadcast(self, payload) -> None:
        """Point-to-point copy to every machine (charged as m messages)."""
        for dst in range(self.m):
            self._outbox.append((dst, payload))

    def finish(self) -> None:
        self._finished = True


def validate_inbox(msgs: list[Message], receiver: int) -> None:
    """Order an inbox by (sender, sequence) and reject duplicated pairs."""
    seen = set()
    for msg in msgs:
        key = (msg.sender, msg.sequence)
        if key in seen:
            raise DuplicateSequence(f"repeated {key} to machine {receiver}")
        seen.add(key)
    msgs.sort(key=lambda msg: (msg.sender, msg.sequence))


@dataclass
class SimResult:
    outputs: list
    metrics: list[RoundMetrics]
    rounds: int = field(init=False)

    def __post_init__(self):
        self.rounds = len(self.metrics)


def run_simulation(program, config: ClusterConfig, shards) -> SimResult:
    """Run a program until quiescence; returns outputs and per-round metrics.

    ``shards`` is a list of length m -- the initial resident data handed to
    each machine's ``setup``.
    """
    m = config.machines
    if len(shards) != m:
        raise ValueError(f"got {len(shards)} shards for {m} machines")

    total_input = sum(measure_words(s) for s in shards)
    ceiling = config.round_ceiling
    if ceiling is None:
        ceiling = 64 * math.ceil(math.log2(max(total_input, 2))) + 64

    states = []
    for i in range(m):
        state = program.setup(i, m, shards[i], config)
        if config.enforce_caps:
            resident = measure_words(state)
            if resident > config.words:
                raise CapExceeded(i, 0, "resident", resident, config.words)
        states.append(state)

    seq_counters = [0] * m
    inboxes = [[] for _ in range(m)]
    metrics: list[RoundMetrics] = []

    for round_index in range(1, ceiling + 1):
        pending = [[] for _ in range(m)]
        sent_words = [0] * m
        recv_words = [0] * m
        any_sent = False
        all_finished = True

        for i in range(m):
            ctx = MachineContext(i, m, round_index, states[i], inboxes[i], config)
            program.step(ctx)
            states[i] = ctx.state
            for dst, payload in ctx._outbox:
                msg = Message(i, dst, payload, seq_counters[i])
                seq_counters[i] += 1
                pending[dst].append(msg)
                w = msg.words
                sent_words[i] += w
                recv_words[dst] += w
                any_sent = True
            if not ctx._finished:
                all_finished = False

        # exchange barrier: validate, order, deliver
        resident_words = [measure_words(states[i]) for i in range(m)]
        for i in range(m):
            if config.enforce_caps:
                if resident_words[i] > config.words:
                    raise CapExceeded(i, round_index, "resident",
                                      resident_words[i], config.words)
                if sent_words[i] > config.words:
                    raise CapExceeded(i, round_index, "sent",
                                      sent_words[i], config.words)
                if recv_words[i] > config.words:
                    raise CapExceeded(i, round_index, "received",
                                      recv_words[i], config.words)
            validate_inbox(pending[i], i)

        metrics.append(RoundMetrics(
            round=round_index,
            max_resident=max(resident_words),
            max_sent=max(sent_words),
            max_received=max(recv_words),
            total_moved=sum(sent_words),
        ))

        inboxes = pending
        if all_finished and not any_sent:
            outputs = [program.output(i, states[i]) for i in range(m)]
            return SimResult(outputs=outputs, metrics=metrics)

    raise NonTermination(ceiling)

"""Synchronous consensus plugins and the silent-consensus wrapper.

A plugin is a pure state machine over rounds 1..R:

    fresh(input_bit) -> state                    # state["self"] is the node index
    step(state, i, received) -> (state, sends)   # received: payloads of round
                                                 # i-1 (None entries allowed),
                                                 # ignored for i == 1
    finish(state, received) -> output bit        # received: round-R payloads
    missing_payload(i, sender) -> payload        # canonical stand-in

Payloads are bit tuples; `None` means "no message".  `wrap_silent` turns any
such plugin into one that sends nothing when every correct input is 0: two
extra broadcast rounds demote insufficiently supported 1-inputs to 0, gate
entry into the inner protocol, and force output 0 unless enough round-2
support was seen; the inner protocol is additionally policed against its own
declared bit bound and locally aborted on a violation.

`run_lockstep` executes a plugin directly, round by round, with a scriptable
byzantine message matrix.  It is the independent oracle the simulation's
recorded executions are replayed against, and the harness for exhaustive
protocol-level adversarial search.
"""

from __future__ import annotations

from typing import Callable, Dict, Optional, Sequence, Tuple

Payload = Tuple[int, ...]
ONE: Payload = (1,)


class NodePlugin:
    """One participant's instance of a plugin, with its node index bound."""

    def __init__(self, proto, index: int):
        self.proto = proto
        self.index = index
        self.rounds = proto.rounds
        self.bit_bound = proto.bit_bound

    def fresh(self, input_bit: int):
        state = self.proto.fresh(input_bit)
        state["self"] = self.index
        return state

    def step(self, state, i, received):
        return self.proto.step(state, i, received)

    def finish(self, state, received):
        return self.proto.finish(state, received)

    def missing_payload(self, i, sender):
        return self.proto.missing_payload(i, sender)


class PhaseKing:
    """f+1 phases of three rounds each: value exchange, proposal, king.

    Every participant sends an explicit payload every round (non-kings send an
    empty payload in king rounds), so a missing message always means a missing
    sender and the canonical stand-in is semantically neutral.
    """

    def __init__(self, n: int, f: int):
        if 3 * f >= n:
            raise ValueError(f"phase king needs f < n/3, got n={n}, f={f}")
        self.n = n
        self.f = f
        self.rounds = 3 * (f + 1)
        self.bit_bound = 4 * (f + 1) * n
        self.name = f"phase-king(n={n},f={f})"

    def fresh(self, input_bit: int) -> dict:
        return {"value": 1 if input_bit else 0, "proposal": None,
                "follow_king": True}

    def _king(self, i: int) -> int:
        return ((i - 1) // 3) % self.n

    def _absorb(self, state: dict, i: int, received: Sequence[Optional[Payload]]) -> None:
        """Fold round-i receipts into the state."""
        sub = (i - 1) % 3
        if sub == 0:
            counts = [0, 0]
            for m in received:
                if m is not None and len(m) == 1 and m[0] in (0, 1):
                    counts[m[0]] += 1
            best = 0 if counts[0] >= counts[1] else 1
            state["proposal"] = best if counts[best] >= self.n - self.f else None
        elif sub == 1:
            counts = [0, 0]
            for m in received:
                if m is not None and len(m) == 2 and m[0] == 1 and m[1] in (0, 1):
                    counts[m[1]] += 1
            best = 0 if counts[0] >= counts[1] else 1
            if counts[best] > self.f:
                state["value"] = best
            state["follow_king"] = counts[best] < self.n - self.f
        else:
            if state["follow_king"]:
                m = received[self._king(i)]
                state["value"] = m[0] if (m is not None and len(m) == 1
                                          and m[0] in (0, 1)) else 0

    def step(self, state: dict, i: int,
             received: Optional[Sequence[Optional[Payload]]]) -> tuple:
        if i > 1:
            self._absorb(state, i - 1, received)
        sub = (i - 1) % 3
        if sub == 0:
            out: Optional[Payload] = (state["value"],)
        elif sub == 1:
            p = state["proposal"]
            out = (0, 0) if p is None else (1, p)
        else:
            out = (state["value"],) if self._king(i) == state["self"] else ()
        return state, [out] * self.n

    def finish(self, state: dict, received: Sequence[Optional[Payload]]) -> int:
        self._absorb(state, self.rounds, received)
        return state["value"]

    def missing_payload(self, i: int, sender: int) -> Payload:
        sub = (i - 1) % 3
        if sub == 0:
            return (0,)
        if sub == 1:
            return (0, 0)
        return (0,) if sender == self._king(i) else ()


class SilentWrapper:
    """Silent binary consensus from any synchronous consensus plugin."""

    def __init__(self, inner_factory: Callable[[], object], n: int, f: int):
        if 3 * f >= n:
            raise ValueError(f"silent wrapper needs f < n/3, got n={n}, f={f}")
        probe = inner_factory()
        self.n = n
        self.f = f
        self.inner_factory = inner_factory
        self.inner_rounds = probe.rounds
        self.rounds = probe.rounds + 2
        self.bit_bound = probe.bit_bound + 2 * (n - 1)
        self.name = f"silent[{probe.name}]"

    def fresh(self, input_bit: int) -> dict:
        return {"self": None, "input": 1 if input_bit else 0,
                "r1_ones": 0, "r2_ones": 0, "inner_active": False,
                "inner": None, "inner_plugin": None, "inner_bits": 0,
                "aborted": False}

    def _ones(self, received: Sequence[Optional[Payload]]) -> int:
        return sum(1 for m in received if m == ONE)

    @staticmethod
    def _canonical(plugin, j: int, received: Sequence[Optional[Payload]]) -> list:
        return [m if m is not None else plugin.missing_payload(j, u)
                for u, m in enumerate(received)]

    def step(self, state: dict, i: int,
             received: Optional[Sequence[Optional[Payload]]]) -> tuple:
        n = self.n
        if i == 1:
            out = ONE if state["input"] == 1 else None
            return state, [out] * n
        if i == 2:
            state["r1_ones"] = self._ones(received)
            if state["r1_ones"] < n - self.f:
                state["input"] = 0
            state["inner_active"] = state["r1_ones"] >= self.f + 1
            out = ONE if state["input"] == 1 else None
            return state, [out] * n
        # Rounds 3..R+2 carry the inner protocol's rounds 1..R.
        j = i - 2
        if i == 3:
            state["r2_ones"] = self._ones(received)
            if state["r2_ones"] < n - self.f:
                state["input"] = 0
            if state["inner_active"]:
                state["inner_plugin"] = NodePlugin(self.inner_factory(), state["self"])
                state["inner"] = state["inner_plugin"].fresh(state["input"])
        if not state["inner_active"] or state["aborted"]:
            return state, [None] * n
        plugin = state["inner_plugin"]
        if plugin is None:
            # Rounds fired out of order (possible only from a corrupted boot
            # state); the inner run is undefined, so abort locally.
            state["aborted"] = True
            return state, [None] * n
        prev = self._canonical(plugin, j - 1, received) if j > 1 else None
        state["inner"], sends = plugin.step(state["inner"], j, prev)
        cost = sum(len(m) for u, m in enumerate(sends)
                   if m is not None and u != state["self"])
        state["inner_bits"] += cost
        if state["inner_bits"] > plugin.bit_bound:
            state["aborted"] = True
            return state, [None] * n
        return state, list(sends)

    def finish(self, state: dict, received: Sequence[Optional[Payload]]) -> int:
        if not state["inner_active"] or state["aborted"]:
            return 0
        if state["r2_ones"] <= self.f:
            return 0
        plugin = state["inner_plugin"]
        if plugin is None:
            return 0
        last = self._canonical(plugin, self.inner_rounds, received)
        return plugin.finish(state["inner"], last)

    def missing_payload(self, i: int, sender: int) -> Payload:
        return ()


def wrap_silent(inner_factory: Callable[[], object], n: int, f: int) -> SilentWrapper:
    return SilentWrapper(inner_factory, n, f)


def phase_king_silent(n: int, f: int) -> SilentWrapper:
    return wrap_silent(lambda: PhaseKing(n, f), n, f)


def make_protocol(name: str, n: int, f: int):
    if name == "phase-king-silent":
        return phase_king_silent(n, f)
    if name == "phase-king":
        return PhaseKing(n, f)
    raise ValueError(f"unknown protocol {name!r}")


def run_lockstep(proto_factory: Callable[[], object], inputs: Dict[int, int],
                 n: int,
                 byzantine: Optional[Dict[int, Callable[[int, int], Optional[Payload]]]] = None,
                 participants: Optional[set] = None):
    """Direct synchronous execution; the oracle everything else is checked against.

    byzantine maps node -> fn(round, receiver) -> payload-or-None.
    Returns (outputs, sent, received): per-participant output bit, the send
    matrix sent[i][u][w] and receive matrix received[i][w][u].
    """
    byzantine = byzantine or {}
    correct = [v for v in range(n) if v not in byzantine]
    if participants is None:
        participants = set(correct)
    plugins, states = {}, {}
    rounds = None
    for v in correct:
        if v in participants:
            plugins[v] = NodePlugin(proto_factory(), v)
            states[v] = plugins[v].fresh(inputs[v])
            rounds = plugins[v].rounds
    sent: Dict[int, dict] = {}
    received: Dict[int, dict] = {}
    last_received = {v: [None] * n for v in plugins}
    for i in range(1, rounds + 1):
        sent[i] = {}
        for v, plugin in plugins.items():
            prev = None if i == 1 else last_received[v]
            states[v], sends = plugin.step(states[v], i, prev)
            sent[i][v] = list(sends)
        for u, fn in byzantine.items():
            sent[i][u] = [fn(i, w) for w in range(n)]
        received[i] = {v: [sent[i][u][v] if u in sent[i] else None
                           for u in range(n)]
                       for v in plugins}
        last_received = received[i]
    outputs = {v: plugins[v].finish(states[v], last_received[v]) for v in plugins}
    return outputs, sent, received


def replay(proto_factory: Callable[[], object], index: int, input_bit: int,
           received_by_round: Sequence[Sequence[Optional[Payload]]]) -> int:
    """Re-run one node's recorded execution through the plugin state machine.

    received_by_round[k] is the payload vector the node fed to its round-(k+1)
    computation; the last entry feeds the output computation.
    """
    plugin = NodePlugin(proto_factory(), index)
    state = plugin.fresh(input_bit)
    for i in range(1, plugin.rounds + 1):
        prev = None if i == 1 else received_by_round[i - 2]
        state, _ = plugin.step(state, i, prev)
    return plugin.finish(state, received_by_round[plugin.rounds - 1])

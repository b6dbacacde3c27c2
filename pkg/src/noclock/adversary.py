"""Adversary machinery: delay policies, byzantine node strategies, clock-rate
schedules, and corrupted-boot state generation.

Byzantine nodes are ordinary event handlers with full control over what they
send (and, since the adversary also owns the delay policy, when it arrives).
Strategies that need to stay trusted by the clock-estimate layer run an honest
copy of it and misbehave one layer up.
"""

from __future__ import annotations

from fractions import Fraction
from typing import Optional

from . import messages as msg
from .clocksync import ClockSync
from .node import NodeRuntime
from .params import Params
from .rounds import Instance
from .protocols import NodePlugin

# -- delay policies -----------------------------------------------------------


def make_delay_policy(name: str, d: Fraction):
    lo, hi = 17, 1007         # (d/64, d - d/64) open band, in 1024ths
    if name == "uniform":
        def policy(sender, receiver, envelope, t, rng):
            return Fraction(rng.randint(lo, hi), 1024) * d
    elif name == "fast":
        def policy(sender, receiver, envelope, t, rng):
            return Fraction(rng.randint(lo, lo + 48), 1024) * d
    elif name == "slow":
        def policy(sender, receiver, envelope, t, rng):
            return Fraction(rng.randint(hi - 48, hi), 1024) * d
    elif name == "split":
        # Fast to the lower half of the ids, slow to the upper half.
        def policy(sender, receiver, envelope, t, rng):
            jitter = rng.randint(0, 32)
            if receiver % 2 == 0:
                return Fraction(lo + jitter, 1024) * d
            return Fraction(hi - jitter, 1024) * d
    elif name == "boundary":
        def policy(sender, receiver, envelope, t, rng):
            edge = rng.randint(1, 4)
            return Fraction(edge if rng.random() < 0.5 else 1024 - edge, 1024) * d
    else:
        raise ValueError(f"unknown delay policy {name!r}")
    return policy


# -- clock-rate schedules -------------------------------------------------------


def make_rate_schedule(kind: str, theta: Fraction, duration: Fraction, rng):
    """Piecewise-constant rates in [1, theta]."""
    if kind == "fixed_min" or theta == 1:
        return [(0, Fraction(1))]
    if kind == "fixed_max":
        return [(0, theta)]
    if kind == "random_steps":
        segs = []
        t = Fraction(0)
        while t < duration:
            step = Fraction(rng.randint(0, 8), 8)
            segs.append((t, 1 + step * (theta - 1)))
            t += rng.randint(2, 12)
        return segs
    raise ValueError(f"unknown rate schedule {kind!r}")


# -- byzantine strategies ----------------------------------------------------------


class SilentNode:
    """Sends nothing, ever."""

    def __init__(self, sim, node, p, proto_factory=None, oracle=None):
        pass

    def start(self):
        pass

    def on_threshold(self, node, units, tag):
        pass

    def on_deliver(self, node, sender, envelope):
        pass

    def on_action(self, node, payload):
        pass


def random_envelope(p: Params, rng):
    kind = rng.randrange(5)
    stamp = rng.randrange(p.clock_modulus)
    if kind == 0:
        vals = tuple(None if rng.random() < 0.3
                     else rng.randrange(p.clock_modulus)
                     for _ in range(p.n))
        return msg.Update(vals)
    if kind == 1:
        return msg.Init(stamp)
    if kind == 2:
        return msg.Echo((rng.randrange(p.n), stamp))
    if kind == 3:
        payload = None if rng.random() < 0.5 else \
            tuple(rng.randrange(2) for _ in range(rng.randint(0, 3)))
        return msg.RoundMsg((rng.randrange(p.n), stamp),
                            rng.randint(0, p.rounds + 2), payload)
    return msg.Garbage(tuple(rng.randrange(256) for _ in range(rng.randint(1, 8))))


class NoiseNode:
    """Broadcasts random well-formed and malformed envelopes at tick pace."""

    def __init__(self, sim, node, p: Params, proto_factory=None, oracle=None):
        self.sim = sim
        self.node = node
        self.p = p

    def start(self):
        self._next_wake()

    def _next_wake(self):
        clock = self.sim.clocks[self.node]
        units = self.p.grid.floor_units(clock.value(self.sim.now))
        self.sim.alarm(self.node, units + self.p.update_period, ("wake",))

    def on_threshold(self, node, units, tag):
        rng = self.sim.rng
        for w in range(self.p.n):
            if w != self.node and rng.random() < 0.7:
                env = random_envelope(self.p, rng)
                self.sim.send(self.node, w, env, env.frame_bits(self.p),
                              env.payload_bits())
        self._next_wake()

    def on_deliver(self, node, sender, envelope):
        pass

    def on_action(self, node, payload):
        pass


class SplitEchoNode(NodeRuntime):
    """Byzantine initiator: skewed init stamps to subsets, conflicting echoes.

    Clock and round layers run honestly (inherited), so the node keeps the
    correct nodes' trust while it tries to split instance initiation.
    """

    def on_action(self, node, payload):
        if payload[0] != "initiate":
            return
        p = self.p
        now = self._reading()
        base = now % p.clock_modulus
        frame = msg.Init(base).frame_bits(p)
        for w in range(p.n):
            if w == self.node:
                continue
            # Half the receivers see a stamp near the band edge, half see it
            # clean; some instances will assemble only partial echo support.
            skew = (p.init_band - p.quantum) if w % 2 else 0
            stamp = (base + skew) % p.clock_modulus
            self.sim.send(self.node, w, msg.Init(stamp), frame, 0)
        # Echo a pair of conflicting labels ourselves.
        for w in range(p.n):
            if w == self.node:
                continue
            stamp = (base + (p.quantum if w % 2 else 0)) % p.clock_modulus
            env = msg.Echo((self.node, stamp))
            self.sim.send(self.node, w, env, env.frame_bits(p), 0)


class EquivocatingRoundsNode(NodeRuntime):
    """Participates like a correct node but equivocates round payloads."""

    def _send_round(self, receiver: int, envelope: msg.RoundMsg) -> None:
        payload = envelope.payload
        if payload is not None and receiver % 2:
            payload = tuple(1 - b for b in payload)
            envelope = msg.RoundMsg(envelope.label, envelope.round, payload)
        elif payload is None and receiver % 2 and envelope.round <= 2:
            envelope = msg.RoundMsg(envelope.label, envelope.round, (1,))
        super()._send_round(receiver, envelope)


class ClockSkewNode:
    """Announces legally-timed clock updates at an adversarial pace.

    Claims advance by exactly one update period per broadcast, but broadcasts
    are spaced at the fastest / slowest legal cadence (or alternate), which
    drags every correct node's estimate of this clock as far as the checks
    allow.  Other nodes' rows are relayed honestly to keep everyone's trust.
    """

    def __init__(self, sim, node, p: Params, proto_factory=None, oracle=None,
                 mode: str = "fastest"):
        self.sim = sim
        self.node = node
        self.p = p
        self.mode = mode
        self.clocksync = ClockSync(p, node)
        self.claim_units = 0          # unbounded claim counter, period grid
        self.flip = False

    def start(self):
        clock = self.sim.clocks[self.node]
        h0 = self.p.grid.floor_units(clock.value(self.sim.now))
        period = self.p.update_period
        self.claim_units = (h0 // period) * period
        self.sim.alarm(self.node, (h0 // period + 1) * period, ("tick",))

    def boot_claims(self, claims, now: int):
        self.clocksync.boot_clean(claims, now)

    def _spacing(self) -> Fraction:
        p = self.p
        fast = p.d + 2 * p.grid.quantum
        slow = 3 * p.d_clk
        if self.mode == "fastest":
            return fast
        if self.mode == "slowest":
            return slow
        self.flip = not self.flip
        return fast if self.flip else slow

    def on_threshold(self, node, units, tag):
        p = self.p
        self.claim_units += p.update_period
        vec = list(self.clocksync.on_tick(units))
        vec[self.node] = self.claim_units % p.clock_modulus
        env = msg.Update(tuple(vec))
        frame = env.frame_bits(p)
        for w in range(p.n):
            if w != self.node:
                self.sim.send(self.node, w, env, frame, 0, delay=p.d / 2)
        # Next broadcast at an adversarial real-time spacing, expressed as a
        # local alarm through this node's own clock.
        clock = self.sim.clocks[self.node]
        target = clock.value(self.sim.now + self._spacing())
        self.sim.alarm(self.node, p.grid.ceil_units(target), ("tick",))

    def on_deliver(self, node, sender, envelope):
        if isinstance(envelope, msg.Update) and msg.well_formed(envelope, self.p):
            now = self.p.grid.floor_units(self.sim.clocks[self.node].value(self.sim.now))
            self.clocksync.on_update(sender, list(envelope.values), now)

    def on_action(self, node, payload):
        pass


STRATEGIES = {
    "silent": SilentNode,
    "noise": NoiseNode,
    "split_echo": SplitEchoNode,
    "equivocate_rounds": EquivocatingRoundsNode,
    "clock_skew": ClockSkewNode,
}


def make_byzantine(name: str, sim, node: int, p: Params, proto_factory, oracle,
                   mode: Optional[str] = None):
    cls = STRATEGIES.get(name)
    if cls is None:
        raise ValueError(f"unknown byzantine strategy {name!r}")
    if cls is ClockSkewNode:
        return cls(sim, node, p, proto_factory, oracle, mode=mode or "fastest")
    return cls(sim, node, p, proto_factory, oracle)


# -- corrupted boot states ---------------------------------------------------------


def corrupt_runtime(rt: NodeRuntime, rng, horizon_units: int) -> None:
    """Randomize one correct node's entire protocol state in place.

    Alarm hardware is assumed to survive the corruption: fabricated future
    deadlines within the horizon get their threshold events scheduled, so the
    corrupted registers actually fire instead of sitting inert.
    """
    p = rt.p
    n = p.n
    now = p.grid.floor_units(rt.sim.clocks[rt.node].value(rt.sim.now))
    span = 2 * p.trust_regain

    cs = rt.clocksync
    for u in range(n):
        for w in range(n):
            cs.rows[u][w] = (None if rng.random() < 0.25
                             else rng.randrange(p.clock_modulus))
        cs.last_update_at[u] = now + rng.randint(-span, span)
        cs.report_hold_until[u] = (None if rng.random() < 0.5
                                   else now + rng.randint(-span, span))
        cs.trust_hold_until[u] = (None if rng.random() < 0.5
                                  else now + rng.randint(-span, span))

    ini = rt.initiation
    for _ in range(rng.randint(0, 3 * n)):
        label = (rng.randrange(n), rng.randrange(p.clock_modulus))
        senders = set(rng.sample(range(n), rng.randint(1, n)))
        ini.stored[label] = senders
        ini.stored_at[label] = {u: now + rng.randint(-2 * p.echo_ttl, 2 * p.echo_ttl)
                                for u in senders}
        if rng.random() < 0.5:
            deadline = now + rng.randint(-p.gate_hold, 4 * p.gate_hold)
            ini.gate_deadline[label] = deadline
            if now < deadline <= now + horizon_units:
                rt._alarm(deadline, ("gate", label))
    for w in range(n):
        ini.last_init_rx[w] = (None if rng.random() < 0.5
                               else now + rng.randint(-span, span))
    ini.last_own_init = None if rng.random() < 0.5 else now + rng.randint(-span, span)

    rounds = rt.rounds
    count = rng.randint(0, 4)
    overload_batch = rng.random() < 0.25
    if overload_batch:
        # Enough fabricated busy instances for one initiator to trip the
        # overload rules once counters are rebuilt.
        count = p.max_busy_instances + 1 + rng.randint(0, 3)
    pinned = rng.randrange(n)
    for k in range(count):
        initiator = pinned if overload_batch else rng.randrange(n)
        label = (initiator, rng.randrange(p.clock_modulus))
        if label in rounds.instances:
            continue
        inst = Instance(label, rng.randrange(2), rng.choice((1, 2)),
                        rng.randrange(2), now + rng.randint(-p.instance_ttl,
                                                            p.instance_ttl),
                        NodePlugin(rounds.proto_factory(), rt.node))
        for i in range(1, inst.plugin.rounds + 2):
            if rng.random() < 0.3:
                t = now + rng.randint(-p.stall_after, 2 * p.stall_after)
                inst.thresholds[i] = t
                if now < t <= now + horizon_units:
                    rt._alarm(t, ("round", label, i))
        for u in range(n):
            for i in range(1, inst.plugin.rounds + 1):
                if rng.random() < 0.1:
                    inst.inbox[(u, i)] = None if rng.random() < 0.5 else (rng.randrange(2),)
                    inst.counts[i] += 1
        inst.nontrivial = True if overload_batch else rng.random() < 0.7
        inst.last_progress = now + rng.randint(-2 * p.stall_after, p.stall_after)
        rounds.instances[label] = inst

    guard = rt.guard
    for label, inst in rounds.instances.items():
        guard.joins[label[0]].append(inst.joined_at)
        if inst.nontrivial:
            guard.busy[label[0]].add(label)
        guard.instances_joined += 1
    if rng.random() < 0.1:
        guard.suppress_until = now + rng.randint(0, 4 * p.quarantine_hold)


def random_garbage(sim, p: Params, rng) -> None:
    """Arbitrary channel contents delivered before time d."""
    for s in range(p.n):
        for r in range(p.n):
            if s == r:
                continue
            for _ in range(rng.randint(0, 2)):
                env = random_envelope(p, rng)
                at = Fraction(rng.randint(1, 1023), 1024) * p.d
                sim.inject_garbage(s, r, env, at)

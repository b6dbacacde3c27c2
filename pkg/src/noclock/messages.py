"""Protocol envelopes and their wire-size accounting.

Payloads are tuples of bits.  `frame_bits` counts everything except protocol
payload bits; the split matters because instance bit budgets and the silence
property are stated over payload bits, while amortized totals count both.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Tuple

from .params import Params

Label = Tuple[int, int]          # (initiator, stamp)
Payload = Tuple[int, ...]        # protocol payload bits


@dataclass(frozen=True, slots=True)
class Update:
    values: tuple      # one clock value or None per node

    def frame_bits(self, p: Params) -> int:
        return p.update_msg_bits()

    def payload_bits(self) -> int:
        return 0


@dataclass(frozen=True, slots=True)
class Init:
    stamp: int

    def frame_bits(self, p: Params) -> int:
        return p.init_msg_bits()

    def payload_bits(self) -> int:
        return 0


@dataclass(frozen=True, slots=True)
class Echo:
    label: Label

    def frame_bits(self, p: Params) -> int:
        return p.echo_msg_bits()

    def payload_bits(self) -> int:
        return 0


@dataclass(frozen=True, slots=True)
class RoundMsg:
    label: Label
    round: int
    payload: Optional[Payload]   # None is the explicit non-message

    def frame_bits(self, p: Params) -> int:
        return p.round_frame_bits()

    def payload_bits(self) -> int:
        return 0 if self.payload is None else len(self.payload)


@dataclass(frozen=True, slots=True)
class Garbage:
    """Arbitrary junk the network may deliver before time d."""
    blob: tuple

    def frame_bits(self, p: Params) -> int:
        return 8 * len(self.blob)

    def payload_bits(self) -> int:
        return 0


def well_formed(msg, p: Params) -> bool:
    """Structural validity; senders of malformed envelopes are trace-marked."""
    if isinstance(msg, Update):
        return (len(msg.values) == p.n
                and all(p.clock_value_ok(v) for v in msg.values))
    if isinstance(msg, Init):
        return p.clock_value_ok(msg.stamp) and msg.stamp is not None
    if isinstance(msg, Echo):
        ini, stamp = msg.label
        return 0 <= ini < p.n and p.clock_value_ok(stamp) and stamp is not None
    if isinstance(msg, RoundMsg):
        ini, stamp = msg.label
        if not (0 <= ini < p.n and p.clock_value_ok(stamp) and stamp is not None):
            return False
        if msg.payload is not None and not all(b in (0, 1) for b in msg.payload):
            return False
        return isinstance(msg.round, int)
    return False

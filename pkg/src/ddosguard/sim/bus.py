"""In-process message bus with one-tick delivery latency."""

from __future__ import annotations

import zlib
from dataclasses import dataclass, field
from typing import Iterable, List, Optional

from ..wire import PROTO_TCP, ControlMessage, MsgKind, Source, decode_header, encode_header

CMS_NAME = "cms"
FIREWALL_NAME = "firewall"
IDPS_NAME = "idps"
MINING_NAME = "mining"


def agent_name(vm_id: int) -> str:
    return f"agent-{vm_id}"


@dataclass(frozen=True)
class Envelope:
    """A framed control message in flight between two named endpoints."""

    sender: str
    recipient: str
    sent_at: int
    frame: bytes
    _msg: Optional[ControlMessage] = field(default=None, compare=False, repr=False)

    @property
    def msg(self) -> ControlMessage:
        if self._msg is None:
            object.__setattr__(self, "_msg", decode_header(self.frame))
        return self._msg

    @property
    def order_key(self):
        m = self.msg
        return (int(m.source), m.seq, self.sender)


class Endpoint:
    """Base for components that originate framed messages."""

    source: Source

    def __init__(self, name: str, key: int, next_proto: int = PROTO_TCP) -> None:
        self.name = name
        self.key = key
        self.next_proto = next_proto
        self._seq = 0

    def send(self, recipient: str, kind: MsgKind, payload: bytes, now: int,
             key: Optional[int] = None) -> Envelope:
        msg = ControlMessage(self.source, kind, self._seq,
                             self.key if key is None else key, self.next_proto, payload)
        # the wire field is 16 bits; long runs wrap around
        self._seq = (self._seq + 1) & 0xFFFF
        return Envelope(self.name, recipient, now, encode_header(msg), msg)


def _lost(env: Envelope, seed: int, loss_rate: float) -> bool:
    if loss_rate <= 0.0:
        return False
    if loss_rate >= 1.0:
        return True
    digest = zlib.crc32(f"{seed}|{env.sender}|{env.recipient}|{env.sent_at}|{env.msg.seq}".encode())
    return digest / 2**32 < loss_rate


def bus_deliver(outbox: Iterable[Envelope], loss_rate: float = 0.0, seed: int = 0) -> List[Envelope]:
    """Order a tick's emissions for delivery and apply deterministic loss."""
    ordered = sorted(outbox, key=lambda e: e.order_key)
    return [e for e in ordered if not _lost(e, seed, loss_rate)]

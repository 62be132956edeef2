"""Control-plane header codec.

Every control message exchanged with the management service carries a
fixed 10-byte header followed by an opaque payload::

    byte 0      source (3 bits, MSB) | kind (5 bits)
    bytes 1-2   sequence number, big-endian
    bytes 3-6   authentication key, big-endian
    byte 7      next protocol (IANA layer-4 number)
    bytes 8-9   payload length, big-endian
    bytes 10-   payload

Structured payloads are compact JSON; captured traffic travels as packed
packet records (see :func:`encode_packet_batch`).
"""

from __future__ import annotations

import enum
import json
import struct
from dataclasses import dataclass
from typing import Any, List, Sequence, Tuple

HEADER = struct.Struct("!BHIBH")
HEADER_SIZE = HEADER.size  # 10
MAX_PAYLOAD = 0xFFFF

PROTO_TCP = 6
PROTO_UDP = 17


class WireError(ValueError):
    pass


class FieldOverflow(WireError):
    pass


class Truncated(WireError):
    pass


class InvalidSource(WireError):
    pass


class InvalidKind(WireError):
    pass


class Source(enum.IntEnum):
    CONTROL_CENTER = 0b000
    FIREWALL = 0b001
    AGENT = 0b010
    MINING_CENTER = 0b011
    IDPS = 0b100


class MsgKind(enum.IntEnum):
    ALLOHA = 0
    ALERT1 = 1
    ALERT2 = 2
    ALERT3 = 3
    ACK = 4
    HIGH_USERS_REPORT = 5
    TRAFFIC_BUFFER = 6
    PATTERN_REQUEST = 7
    PATTERN_RESULT = 8
    RULE_UPDATE = 9
    POLICING_COMMAND = 10
    BANDWIDTH_CHANGE_NOTICE = 11


ALERT_KINDS = (MsgKind.ALERT1, MsgKind.ALERT2, MsgKind.ALERT3)


@dataclass(frozen=True)
class ControlMessage:
    source: Source
    kind: MsgKind
    seq: int = 0
    auth_key: int = 0
    next_proto: int = 0
    payload: bytes = b""

    def json(self) -> Any:
        return json.loads(self.payload.decode("utf-8")) if self.payload else {}


def encode_header(msg: ControlMessage) -> bytes:
    if len(msg.payload) > MAX_PAYLOAD:
        raise FieldOverflow(f"payload is {len(msg.payload)} bytes, limit {MAX_PAYLOAD}")
    for name, value, bits in (
        ("source", int(msg.source), 3),
        ("kind", int(msg.kind), 5),
        ("seq", msg.seq, 16),
        ("auth_key", msg.auth_key, 32),
        ("next_proto", msg.next_proto, 8),
    ):
        if not 0 <= value < (1 << bits):
            raise FieldOverflow(f"{name}={value} does not fit in {bits} bits")
    first = (int(msg.source) << 5) | int(msg.kind)
    head = HEADER.pack(first, msg.seq, msg.auth_key, msg.next_proto, len(msg.payload))
    return head + bytes(msg.payload)


def decode_header(data: bytes) -> ControlMessage:
    """Decode one framed message; trailing bytes beyond the frame are ignored."""
    if len(data) < HEADER_SIZE:
        raise Truncated(f"need {HEADER_SIZE} header bytes, got {len(data)}")
    first, seq, key, proto, length = HEADER.unpack_from(data)
    src_code, kind_code = first >> 5, first & 0x1F
    try:
        source = Source(src_code)
    except ValueError:
        raise InvalidSource(f"source code {src_code:03b} is reserved") from None
    try:
        kind = MsgKind(kind_code)
    except ValueError:
        raise InvalidKind(f"kind code {kind_code} is reserved") from None
    end = HEADER_SIZE + length
    if len(data) < end:
        raise Truncated(f"declared payload {length} bytes, only {len(data) - HEADER_SIZE} present")
    return ControlMessage(source, kind, seq, key, proto, bytes(data[HEADER_SIZE:end]))


def authenticate(msg: ControlMessage, expected_key: int) -> bool:
    return msg.auth_key == expected_key


def json_payload(obj: Any) -> bytes:
    return json.dumps(obj, separators=(",", ":"), sort_keys=True).encode("utf-8")


# -- captured traffic ------------------------------------------------------
#
# Batch payload: vm (u32) | batch id (u32) | fragment index (u16) |
# fragment count (u16), then fixed records of user (u32) | size (u16) | dscp (u8) | signature (u16).
# The ground-truth attack flag is deliberately not carried.

BATCH_HEAD = struct.Struct("!IIHH")
RECORD = struct.Struct("!IHBH")
RECORDS_PER_FRAGMENT = (MAX_PAYLOAD - BATCH_HEAD.size) // RECORD.size

PacketRecord = Tuple[int, int, int, int]  # user, size, dscp, signature


def encode_packet_batch(vm_id: int, batch_id: int, packets: Sequence[Any]) -> List[bytes]:
    """Split packets into one or more payloads, each within the length limit."""
    return encode_record_batch(
        vm_id, batch_id, [(p.user_id, p.size, int(p.dscp.decimal), p.signature) for p in packets]
    )


def encode_record_batch(vm_id: int, batch_id: int, records: Sequence[PacketRecord]) -> List[bytes]:
    chunks = [records[i:i + RECORDS_PER_FRAGMENT]
              for i in range(0, len(records), RECORDS_PER_FRAGMENT)] or [[]]
    return [
        BATCH_HEAD.pack(vm_id, batch_id, index, len(chunks)) + b"".join(RECORD.pack(*r) for r in chunk)
        for index, chunk in enumerate(chunks)
    ]


def decode_packet_batch(payload: bytes) -> Tuple[int, int, int, int, List[PacketRecord]]:
    if len(payload) < BATCH_HEAD.size or (len(payload) - BATCH_HEAD.size) % RECORD.size:
        raise Truncated("malformed packet batch")
    vm_id, batch_id, index, count = BATCH_HEAD.unpack_from(payload)
    records = list(RECORD.iter_unpack(payload[BATCH_HEAD.size:]))
    return vm_id, batch_id, index, count, records


class BatchAssembler:
    """Collects fragments per (sender, vm, batch) until a batch is complete.

    :meth:`add` returns ``(vm_id, batch_id, records)`` once the last
    fragment is in, otherwise ``None``.
    """

    def __init__(self) -> None:
        self._parts: dict = {}

    def add(self, sender: str, payload: bytes):
        vm_id, batch_id, index, count, records = decode_packet_batch(payload)
        key = (sender, vm_id, batch_id)
        parts = self._parts.setdefault(key, {})
        parts[index] = records
        if len(parts) < count:
            return None
        del self._parts[key]
        merged: List[PacketRecord] = []
        for i in range(count):
            merged.extend(parts[i])
        return vm_id, batch_id, merged


"""Signature extraction from captured traffic.

The detector is a dominant-token frequency test: if one signature token
accounts for at least ``theta`` of the buffered packets it is reported as
the attack pattern.  Any callable with the same ``(packets, theta)`` shape
can be plugged into :class:`MiningCenter`.
"""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass, field
from typing import Callable, FrozenSet, List, Optional, Sequence

from . import dscp
from .sim.bus import CMS_NAME, Endpoint, Envelope
from .traffic import SimPacket
from .wire import BatchAssembler, MsgKind, Source, json_payload

DEFAULT_THETA = 0.5


class EmptyBuffer(ValueError):
    pass


@dataclass(frozen=True)
class AttackSignature:
    signature_token: int
    source_set: FrozenSet[int]
    support: float


def analyze(packets: Sequence[SimPacket], theta: float = DEFAULT_THETA) -> Optional[AttackSignature]:
    if not 0.0 < theta <= 1.0:
        raise ValueError(f"theta {theta} outside (0, 1]")
    if not packets:
        raise EmptyBuffer("nothing to analyze")
    counts = Counter(p.signature for p in packets)
    # smallest token wins ties so the verdict is order independent
    token, hits = min(counts.items(), key=lambda kv: (-kv[1], kv[0]))
    support = hits / len(packets)
    if support < theta:
        return None
    sources = frozenset(p.user_id for p in packets if p.signature == token)
    return AttackSignature(token, sources, support)


Detector = Callable[[Sequence[SimPacket], float], Optional[AttackSignature]]


@dataclass
class MiningJob:
    vm_id: int
    packets: List[SimPacket]
    opened_at: int
    latency: int
    request: int = 0
    verdict: Optional[AttackSignature] = None
    done: bool = False

    def poll(self, now: int, theta: float = DEFAULT_THETA,
             detector: Detector = analyze) -> Optional[dict]:
        """Return the result body once the latency has elapsed, exactly once."""
        if self.done or now < self.opened_at + self.latency:
            return None
        self.done = True
        try:
            self.verdict = detector(self.packets, theta)
        except EmptyBuffer:
            self.verdict = None
        body = {"vm": self.vm_id, "request": self.request, "opened_at": self.opened_at,
                "found": self.verdict is not None}
        if self.verdict is not None:
            body.update(token=self.verdict.signature_token,
                        sources=sorted(self.verdict.source_set),
                        support=self.verdict.support)
        return body


class MiningCenter(Endpoint):
    source = Source.MINING_CENTER

    def __init__(self, key: int, latency: int = 15, theta: float = DEFAULT_THETA,
                 detector: Detector = analyze, name: str = "mining") -> None:
        super().__init__(name, key)
        self.latency = latency
        self.theta = theta
        self.detector = detector
        self.jobs: List[MiningJob] = []
        self._assembler = BatchAssembler()

    def receive(self, env: Envelope, now: int) -> List[Envelope]:
        if env.msg.kind != MsgKind.PATTERN_REQUEST:
            return []
        done = self._assembler.add(env.sender, env.msg.payload)
        if done is not None:
            vm_id, request, records = done
            packets = [SimPacket(user, vm_id, size, dscp.from_decimal(code), False, sig)
                       for user, size, code, sig in records]
            self.jobs.append(MiningJob(vm_id, packets, now, self.latency, request))
        return []

    def poll(self, now: int) -> List[Envelope]:
        out = []
        for job in self.jobs:
            body = job.poll(now, self.theta, self.detector)
            if body is not None:
                out.append(self.send(CMS_NAME, MsgKind.PATTERN_RESULT, json_payload(body), now))
        self.jobs = [j for j in self.jobs if not j.done]
        return out

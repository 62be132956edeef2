"""Per-VM software agent.

Each tick the agent measures the load it actually received, compares it
with the bands around its own prediction and reports upward level
crossings to the control center.  It never talks to any other component.
"""

from __future__ import annotations

import logging
from collections import Counter, deque
from dataclasses import dataclass, field
from typing import Deque, Iterable, List, Sequence

from .predictor import (
    AgingPredictor,
    AlertLevel,
    AlertThresholds,
    classify,
    compute_beta,
)
from .sim.bus import CMS_NAME, Endpoint, Envelope
from .traffic import SimPacket, UsageCounter, top_consumers
from .wire import ALERT_KINDS, MsgKind, Source, encode_packet_batch, json_payload

log = logging.getLogger(__name__)


@dataclass
class AgentParams:
    x: float = 0.5
    window: int = 60
    hysteresis: int = 5
    buffer_capacity: int = 10_000
    report_period: int = 30
    report_size: int = 10


@dataclass
class TickView:
    """What the agent concluded on one tick (feeds the metrics row)."""

    load: float
    alpha: float
    beta: float
    level: AlertLevel


def buffer_capture(buffer: Deque[SimPacket], packets: Iterable[SimPacket],
                   level: AlertLevel) -> Deque[SimPacket]:
    """Append to a bounded capture buffer; the oldest packets are evicted."""
    if level >= AlertLevel.LEVEL1:
        buffer.extend(packets)
    return buffer


class Agent(Endpoint):
    source = Source.AGENT

    def __init__(self, vm_id: int, vm_capacity: int, key: int,
                 params: AgentParams | None = None) -> None:
        super().__init__(f"agent-{vm_id}", key)
        self.vm_id = vm_id
        self.capacity = vm_capacity
        self.params = params or AgentParams()
        self.predictor = AgingPredictor(self.params.x, window_size=self.params.window)
        self.level = AlertLevel.NORMAL
        self.buffer: Deque[SimPacket] = deque(maxlen=self.params.buffer_capacity)
        self.usage = UsageCounter()
        self.incident_open = False
        self.received = Counter()
        self.snapshots: List[tuple] = []  # (tick, alpha saved)
        self.restored: List[tuple] = []  # (tick, alpha after restore)
        self._batches = 0
        self._quiet: List[AlertLevel] = []

    @property
    def warmed_up(self) -> bool:
        return len(self.predictor.window) >= self.params.window

    def thresholds(self) -> AlertThresholds:
        alpha = self.predictor.alpha()
        return AlertThresholds(alpha, compute_beta(alpha, self.predictor.sigma()))

    def _next_level(self, observed: AlertLevel) -> AlertLevel:
        if observed >= self.level:
            self._quiet.clear()
            return observed
        self._quiet.append(observed)
        if len(self._quiet) < self.params.hysteresis:
            return self.level
        settled = max(self._quiet)
        self._quiet.clear()
        return settled

    def _alert(self, level: int, view: TickView, now: int) -> Envelope:
        saved = self.predictor.saved
        body = {"vm": self.vm_id, "tick": now, "level": level,
                "alpha": view.alpha, "beta": view.beta, "load": view.load,
                "snapshot": saved[0] if saved is not None else view.alpha}
        return self.send(CMS_NAME, ALERT_KINDS[level - 1], json_payload(body), now)

    def step(self, packets: Sequence[SimPacket], now: int) -> tuple[TickView, List[Envelope]]:
        load = min(100.0, sum(p.size for p in packets) / self.capacity * 100.0)
        self.usage.add(packets)
        pred = self.predictor
        if self.warmed_up:
            th = self.thresholds()
            observed = classify(load, th)
            alpha, beta = th.alpha, th.beta
        else:
            observed = AlertLevel.NORMAL
            alpha = pred.s if pred.seeded else load
            beta = 0.0
        view = TickView(load, alpha, beta, observed)

        prev = self.level
        self.level = self._next_level(observed)
        out: List[Envelope] = []
        if self.level > prev:
            if not pred.has_snapshot:
                # taken before this tick's load is folded in, so it still
                # describes the traffic ahead of the escalation
                pred.snapshot_alpha()
                self.snapshots.append((now, pred.s))
            buffer_capture(self.buffer, packets, self.level)
            for lv in range(prev + 1, self.level + 1):
                out.append(self._alert(lv, view, now))
                # captured traffic goes up with the second and third alerts
                if lv >= AlertLevel.LEVEL2 and self.buffer:
                    out.extend(self._ship_buffer(now))
        else:
            buffer_capture(self.buffer, packets, self.level)
            if self.level == AlertLevel.NORMAL and prev > AlertLevel.NORMAL:
                self.buffer.clear()
                if not self.incident_open:
                    pred.discard_snapshot()

        if now > 0 and now % self.params.report_period == 0:
            users = top_consumers(self.usage.bytes_by_user, self.params.report_size) \
                if self.usage.bytes_by_user else []
            out.append(self.send(CMS_NAME, MsgKind.HIGH_USERS_REPORT,
                                 json_payload({"vm": self.vm_id, "users": users}), now))
        pred.update(load)
        view.level = self.level
        return view, out

    def _ship_buffer(self, now: int) -> List[Envelope]:
        self._batches += 1
        frames = encode_packet_batch(self.vm_id, self._batches, list(self.buffer))
        self.buffer.clear()
        self.incident_open = True
        return [self.send(CMS_NAME, MsgKind.TRAFFIC_BUFFER, f, now) for f in frames]

    def receive(self, env: Envelope, now: int) -> List[Envelope]:
        msg = env.msg
        self.received[msg.kind.name] += 1
        if msg.kind != MsgKind.ACK:
            return []
        body = msg.json()
        if body.get("restore"):
            if self.predictor.has_snapshot:
                self.predictor.restore_alpha()
                self.restored.append((now, self.predictor.s))
            else:
                log.warning("%s: restore without snapshot at tick %d", self.name, now)
        else:
            self.predictor.discard_snapshot()
        self.incident_open = False
        return []

"""Central management service.

The CMS is the only component that talks to everyone: it collects agent
alerts and usage reports, hands captured traffic to the mining center,
turns mined patterns into IDPS rules and drives firewall policing.  Two
outcomes are distinguished per incident:

* the pattern arrives before the detection deadline: the rule is deployed,
  policing is cancelled and the agent rolls its prediction back to the
  pre-attack state;
* otherwise policing stays on and is relaxed in equal steps until the
  bandwidth is fully released; a late pattern still becomes a rule.
"""

from __future__ import annotations

import logging
from collections import Counter
from dataclasses import dataclass, field
from typing import Dict, List, Mapping, Optional

from .firewall import RELEASE_STEPS
from .sim.bus import FIREWALL_NAME, IDPS_NAME, MINING_NAME, Endpoint, Envelope, agent_name
from .wire import BatchAssembler, MsgKind, Source, authenticate, encode_record_batch, json_payload

log = logging.getLogger(__name__)


@dataclass
class CmsParams:
    detect_deadline: int = 30
    release_interval: int = 30
    release_steps: tuple = RELEASE_STEPS
    keepalive_interval: int = 60


@dataclass
class VmLedger:
    level: int = 0
    alpha_at_alert: Optional[float] = None
    snapshot_alpha: Optional[float] = None
    incident: int = 0


@dataclass
class MiningTask:
    """The open investigation for one VM.

    Every buffer shipped during the incident becomes a separate mining
    request with its own deadline.  The task ends on the first positive
    result, or once every request has come back negative.
    """

    vm_id: int
    incident: int
    opened_at: int
    pending: Dict[int, int] = field(default_factory=dict)  # request -> deadline
    expired: bool = False

    @property
    def deadline(self) -> int:
        return min(self.pending.values()) if self.pending else self.opened_at


@dataclass
class ReleaseSchedule:
    vm_id: int
    incident: int
    target: float
    start: int
    interval: int
    steps: tuple

    def command(self, clamp: float) -> dict:
        return {"vm": self.vm_id, "target": self.target, "start": self.start,
                "interval": self.interval, "steps": list(self.steps), "clamp": clamp}


@dataclass(frozen=True)
class CmsEvent:
    tick: int
    vm: int
    what: str
    detail: object = None


class ControlCenter(Endpoint):
    source = Source.CONTROL_CENTER

    def __init__(self, key: int, peer_keys: Mapping[str, int],
                 params: Optional[CmsParams] = None, name: str = "cms") -> None:
        super().__init__(name, key)
        self.peer_keys = dict(peer_keys)
        self.params = params or CmsParams()
        self.ledger: Dict[int, VmLedger] = {}
        self.jobs: Dict[int, MiningTask] = {}
        self.schedules: Dict[int, ReleaseSchedule] = {}
        self.high_consumers: Dict[int, List[int]] = {}
        self.counters = Counter()
        self.events: List[CmsEvent] = []
        self._buffers = BatchAssembler()
        self._requests = 0

    # -- helpers -----------------------------------------------------------

    def _to(self, recipient: str, kind: MsgKind, body, now: int) -> Envelope:
        return self.send(recipient, kind, json_payload(body), now,
                         key=self.peer_keys.get(recipient, 0))

    def _log(self, now: int, vm: int, what: str, detail=None) -> None:
        self.events.append(CmsEvent(now, vm, what, detail))

    def ledger_for(self, vm: int) -> VmLedger:
        return self.ledger.setdefault(vm, VmLedger())

    # -- inbound -----------------------------------------------------------

    def handle(self, env: Envelope, now: int) -> List[Envelope]:
        self.counters["inbound"] += 1
        msg = env.msg
        expected = self.peer_keys.get(env.sender)
        if expected is None or not authenticate(msg, expected):
            self.counters["auth_failure"] += 1
            log.warning("dropping %s from %s: authentication failed", msg.kind.name, env.sender)
            return []
        handler = self._handlers.get(msg.kind)
        if handler is None:
            self.counters["unknown_kind"] += 1
            return []
        self.counters["dispatched"] += 1
        return handler(self, env, now)

    def _on_high_users(self, env: Envelope, now: int) -> List[Envelope]:
        body = env.msg.json()
        self.high_consumers[body["vm"]] = list(body["users"])
        return [self._to(FIREWALL_NAME, MsgKind.HIGH_USERS_REPORT, body, now)]

    def _on_alert(self, env: Envelope, now: int) -> List[Envelope]:
        body = env.msg.json()
        vm, level = body["vm"], int(env.msg.kind)
        led = self.ledger_for(vm)
        led.level = level
        led.alpha_at_alert = body["alpha"]
        self._log(now, vm, f"alert{level}", body["tick"])
        # the agent reports the alpha it will roll back to
        led.snapshot_alpha = body.get("snapshot", body["alpha"])
        if level == 3:
            return self._start_policing(vm, body, now)
        return []

    def _start_policing(self, vm: int, body: dict, now: int) -> List[Envelope]:
        led = self.ledger_for(vm)
        if vm in self.schedules:
            # a running release is never re-armed, so every schedule walks
            # the full step sequence and ends on time
            self._log(now, vm, "alert3_during_release", body["tick"])
            return []
        target = led.snapshot_alpha if led.snapshot_alpha is not None else body["alpha"]
        sched = ReleaseSchedule(vm, led.incident, target, body["tick"],
                                self.params.release_interval, tuple(self.params.release_steps))
        self.schedules[vm] = sched
        self._log(now, vm, "policing", (target, body["tick"]))
        return [self._to(FIREWALL_NAME, MsgKind.POLICING_COMMAND, sched.command(sched.steps[0]), now)]

    def _on_traffic_buffer(self, env: Envelope, now: int) -> List[Envelope]:
        done = self._buffers.add(env.sender, env.msg.payload)
        if done is None:
            return []
        vm, _, records = done
        task = self.jobs.get(vm)
        if task is None:
            led = self.ledger_for(vm)
            led.incident += 1
            task = self.jobs[vm] = MiningTask(vm, led.incident, now)
            self._log(now, vm, "mining_job", len(records))
        else:
            self._log(now, vm, "mining_request", len(records))
        self._requests += 1
        task.pending[self._requests] = now + self.params.detect_deadline
        return [self.send(MINING_NAME, MsgKind.PATTERN_REQUEST, frame, now,
                          key=self.peer_keys.get(MINING_NAME, 0))
                for frame in encode_record_batch(vm, self._requests, records)]

    def _on_pattern_result(self, env: Envelope, now: int) -> List[Envelope]:
        body = env.msg.json()
        vm = body["vm"]
        job = self.jobs.get(vm)
        if job is None or body.get("request") not in job.pending:
            self._log(now, vm, "stale_result")
            return []
        del job.pending[body["request"]]
        if not body["found"] and job.pending:
            self._log(now, vm, "negative_partial")
            return []
        del self.jobs[vm]
        out: List[Envelope] = []
        on_time = not job.expired
        if body["found"]:
            self._log(now, vm, "rule_update", body["token"])
            out.append(self._to(IDPS_NAME, MsgKind.RULE_UPDATE,
                                {"vm": vm, "token": body["token"], "sources": body["sources"]}, now))
        if body["found"] and on_time:
            if self.schedules.pop(vm, None) is not None:
                self._log(now, vm, "policing_cancelled")
                out.append(self._to(FIREWALL_NAME, MsgKind.POLICING_COMMAND,
                                    {"vm": vm, "cancel": True}, now))
            self._log(now, vm, "restore_alpha", self.ledger_for(vm).snapshot_alpha)
        out.append(self._to(agent_name(vm), MsgKind.ACK,
                            {"vm": vm, "found": body["found"],
                             "restore": bool(body["found"] and on_time)}, now))
        return out

    def _on_ack(self, env: Envelope, now: int) -> List[Envelope]:
        self.counters["acks"] += 1
        return []

    def _on_bandwidth_notice(self, env: Envelope, now: int) -> List[Envelope]:
        body = env.msg.json()
        return [self._to(agent_name(body["vm"]), MsgKind.BANDWIDTH_CHANGE_NOTICE, body, now)]

    _handlers = {
        MsgKind.HIGH_USERS_REPORT: _on_high_users,
        MsgKind.ALERT1: _on_alert,
        MsgKind.ALERT2: _on_alert,
        MsgKind.ALERT3: _on_alert,
        MsgKind.TRAFFIC_BUFFER: _on_traffic_buffer,
        MsgKind.PATTERN_RESULT: _on_pattern_result,
        MsgKind.ACK: _on_ack,
        MsgKind.BANDWIDTH_CHANGE_NOTICE: _on_bandwidth_notice,
    }

    # -- timers ------------------------------------------------------------

    def tick(self, now: int, vm_ids=()) -> List[Envelope]:
        out: List[Envelope] = []
        for vm, job in sorted(self.jobs.items()):
            if not job.expired and job.pending and now >= job.deadline:
                job.expired = True
                self._log(now, vm, "deadline_expired")
        for vm, sched in sorted(self.schedules.items()):
            elapsed = now - sched.start
            if elapsed <= 0 or elapsed % sched.interval:
                continue
            k = elapsed // sched.interval
            if k >= len(sched.steps):
                continue
            out.append(self._to(FIREWALL_NAME, MsgKind.POLICING_COMMAND,
                                sched.command(sched.steps[k]), now))
            self._log(now, vm, "policing_step", sched.steps[k])
            if k == len(sched.steps) - 1:
                del self.schedules[vm]
                self._log(now, vm, "released")
        every = self.params.keepalive_interval
        if every and now > 0 and now % every == 0:
            for vm in vm_ids:
                out.append(self._to(agent_name(vm), MsgKind.ALLOHA, {"tick": now}, now))
        return out

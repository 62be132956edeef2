"""Pull an incident timeline for one VM out of a finished simulation."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import List, Optional, Tuple

from .sim.bus import IDPS_NAME, agent_name
from .wire import ALERT_KINDS, MsgKind


def agent_alerts(sim, vm: int) -> List[Tuple[int, int]]:
    """(tick raised, level) for every alert the VM's agent sent, in order."""
    me = agent_name(vm)
    out = []
    for _, env in sim.transcript:
        if env.sender == me and env.msg.kind in ALERT_KINDS:
            out.append((env.sent_at, ALERT_KINDS.index(env.msg.kind) + 1))
    return out


def rule_updates(sim, vm: Optional[int] = None) -> List[Tuple[int, int]]:
    """(tick issued, token) for each RuleUpdate the CMS sent to the IDPS."""
    out = []
    for _, env in sim.transcript:
        if env.recipient == IDPS_NAME and env.msg.kind == MsgKind.RULE_UPDATE:
            body = env.msg.json()
            if vm is None or body["vm"] == vm:
                out.append((env.sent_at, body["token"]))
    return out


def schedules(sim, vm: int) -> List[Tuple[float, int]]:
    """(policing target, anchor tick) for every release schedule on the VM."""
    return [e.detail for e in sim.cms.events if e.vm == vm and e.what == "policing"]


def clamp_changes(rows) -> List[Tuple[int, float]]:
    out = []
    last = None
    for r in rows:
        if r.clamp != last:
            out.append((r.tick, r.clamp))
            last = r.clamp
    return out


@dataclass
class Timeline:
    vm: int
    alerts: List[Tuple[int, int]] = field(default_factory=list)
    rules: List[Tuple[int, int]] = field(default_factory=list)
    clamps: List[Tuple[int, float]] = field(default_factory=list)
    restored: List[Tuple[int, float]] = field(default_factory=list)

    def lines(self, since: int = 0) -> List[str]:
        events = [(t, f"Alert{lv}") for t, lv in self.alerts if t >= since]
        events += [(t, f"RuleUpdate token={tok}") for t, tok in self.rules if t >= since]
        events += [(t, f"clamp -> {c:.2f}") for t, c in self.clamps if t >= since]
        events += [(t, f"alpha restored to {a:.3f}") for t, a in self.restored if t >= since]
        events.sort(key=lambda e: e[0])
        return [f"t={t:4d}  VM {self.vm}  {what}" for t, what in events]


def timeline(sim, vm: int) -> Timeline:
    agent = sim.agents.get(vm)
    return Timeline(
        vm=vm,
        alerts=agent_alerts(sim, vm),
        rules=rule_updates(sim, vm),
        clamps=clamp_changes(sim.series.for_vm(vm)),
        restored=list(agent.restored) if agent is not None else [],
    )

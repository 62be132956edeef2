"""Firewall enforcement: DSCP marking, priority policing and the IDPS rule store.

Enforcement order per tick and VM is police first, then signature filtering,
because the IDPS sits directly behind the firewall.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import AbstractSet, Dict, FrozenSet, List, Mapping, Optional, Sequence, Tuple

from .dscp import AF41, BEST_EFFORT, CS7, SURVIVAL_RANK, DscpClass
from .sim.bus import CMS_NAME, Endpoint, Envelope
from .traffic import SimPacket
from .wire import MsgKind, Source, json_payload

log = logging.getLogger(__name__)

RELEASE_STEPS = (1.0, 0.75, 0.5, 0.25, 0.0)


def classify_dscp(packet: SimPacket, registered: AbstractSet[int],
                  high_consumers: AbstractSet[int]) -> DscpClass:
    if packet.user_id in registered:
        return AF41
    if packet.user_id in high_consumers:
        return CS7
    return BEST_EFFORT


@dataclass
class PolicingPolicy:
    """Police one VM toward ``target_pct`` and relax along ``steps``.

    ``clamp_fraction`` 1.0 polices fully to the target, 0.0 admits
    everything.  The stepped schedule is anchored at ``start``.
    """

    vm_id: int
    target_pct: float
    clamp_fraction: float = 1.0
    exempt_classes: FrozenSet[DscpClass] = frozenset({AF41})
    start: int = 0
    interval: int = 30
    steps: Tuple[float, ...] = RELEASE_STEPS

    def __post_init__(self) -> None:
        if not 0.0 <= self.target_pct <= 100.0:
            raise ValueError(f"policing target {self.target_pct} outside [0, 100]")
        if not 0.0 <= self.clamp_fraction <= 1.0:
            raise ValueError(f"clamp fraction {self.clamp_fraction} outside [0, 1]")
        if any(b > a for a, b in zip(self.steps, self.steps[1:])):
            raise ValueError("release steps must not increase")

    def clamp_at(self, tick: int) -> float:
        if tick < self.start:
            return self.steps[0]
        k = min((tick - self.start) // self.interval, len(self.steps) - 1)
        return self.steps[k]

    def release_tick(self) -> int:
        return self.start + self.interval * (len(self.steps) - 1)

    def advance(self, tick: int) -> float:
        self.clamp_fraction = min(self.clamp_fraction, self.clamp_at(tick))
        return self.clamp_fraction

    def budget_bytes(self, vm_capacity: int) -> float:
        pct = self.target_pct + (100.0 - self.target_pct) * (1.0 - self.clamp_fraction)
        return vm_capacity * pct / 100.0


def _admission_key(packet: SimPacket, exempt: AbstractSet[DscpClass]):
    return (0 if packet.dscp in exempt else 1, -SURVIVAL_RANK[packet.dscp])


def police(packets: Sequence[SimPacket], policy: Optional[PolicingPolicy],
           vm_capacity: int) -> Tuple[List[SimPacket], List[SimPacket], float]:
    """Admit packets in priority order until the budget is spent.

    Admission stops at the first packet that does not fit, so no packet is
    dropped while a lower-precedence one gets through.  Both returned lists
    keep arrival order.
    """
    if policy is None or policy.clamp_fraction <= 0.0:
        admitted = list(packets)
        return admitted, [], sum(p.size for p in admitted) / vm_capacity * 100.0
    budget = policy.budget_bytes(vm_capacity)
    exempt = policy.exempt_classes
    order = sorted(range(len(packets)), key=lambda i: _admission_key(packets[i], exempt))
    keep = bytearray(len(packets))
    used = 0
    for i in order:
        size = packets[i].size
        if used + size > budget:
            break
        used += size
        keep[i] = 1
    admitted = [p for p, k in zip(packets, keep) if k]
    dropped = [p for p, k in zip(packets, keep) if not k]
    return admitted, dropped, used / vm_capacity * 100.0


@dataclass(frozen=True)
class IdpsRule:
    rule_id: int
    signature_token: int
    added_at: int


def idps_filter(packets: Sequence[SimPacket],
                rules: Sequence[IdpsRule]) -> Tuple[List[SimPacket], List[SimPacket]]:
    if not rules:
        return list(packets), []
    tokens = {r.signature_token for r in rules}
    passed, blocked = [], []
    for p in packets:
        (blocked if p.signature in tokens else passed).append(p)
    return passed, blocked


@dataclass
class EnforcementResult:
    admitted: List[SimPacket]
    dropped: List[SimPacket]
    clamp: float
    target_pct: Optional[float]
    clamp_changed: bool = False


class Firewall(Endpoint):
    """Per-VM policing state driven by control-center commands."""

    source = Source.FIREWALL

    def __init__(self, key: int, registered: AbstractSet[int],
                 capacities: Mapping[int, int], name: str = "firewall") -> None:
        super().__init__(name, key)
        self.registered = frozenset(registered)
        self.capacities = dict(capacities)
        self.policies: Dict[int, PolicingPolicy] = {}
        self.high_consumers: Dict[int, FrozenSet[int]] = {}
        self._last_clamp: Dict[int, float] = {}

    def receive(self, env: Envelope, now: int) -> List[Envelope]:
        msg = env.msg
        body = msg.json()
        if msg.kind == MsgKind.POLICING_COMMAND:
            vm = body["vm"]
            if body.get("cancel"):
                self.policies.pop(vm, None)
                return []
            policy = PolicingPolicy(vm_id=vm, target_pct=body["target"], start=body["start"],
                                    interval=body["interval"], steps=tuple(body["steps"]))
            current = self.policies.get(vm)
            if current is not None and (current.start, current.steps) == (policy.start, policy.steps):
                # periodic restatement of the schedule already in force
                policy.clamp_fraction = current.clamp_fraction
            self.policies[vm] = policy
        elif msg.kind == MsgKind.HIGH_USERS_REPORT:
            self.high_consumers[body["vm"]] = frozenset(body["users"])
        else:
            log.debug("firewall ignoring %s from %s", msg.kind.name, env.sender)
        return []

    def current_clamp(self, vm_id: int, now: int) -> float:
        policy = self.policies.get(vm_id)
        if policy is None:
            return 0.0
        clamp = policy.advance(now)
        if clamp <= 0.0 and now >= policy.release_tick():
            del self.policies[vm_id]
            return 0.0
        return clamp

    def enforce(self, vm_id: int, packets: Sequence[SimPacket], now: int) -> EnforcementResult:
        clamp = self.current_clamp(vm_id, now)
        policy = self.policies.get(vm_id)
        high = self.high_consumers.get(vm_id, frozenset())
        for p in packets:
            p.dscp = classify_dscp(p, self.registered, high)
        admitted, dropped, _ = police(packets, policy, self.capacities[vm_id])
        changed = clamp != self._last_clamp.get(vm_id, 0.0)
        self._last_clamp[vm_id] = clamp
        return EnforcementResult(admitted, dropped, clamp,
                                 policy.target_pct if policy else None, changed)

    def notice(self, vm_id: int, clamp: float, now: int) -> Envelope:
        """Tell the control center that a VM's bandwidth allowance changed."""
        return self.send(CMS_NAME, MsgKind.BANDWIDTH_CHANGE_NOTICE,
                         json_payload({"vm": vm_id, "clamp": clamp, "tick": now}), now)


class Idps(Endpoint):
    """Append-only signature store placed behind the firewall."""

    source = Source.IDPS

    def __init__(self, key: int, name: str = "idps") -> None:
        super().__init__(name, key)
        self.rules: List[IdpsRule] = []

    def add_rule(self, token: int, now: int) -> IdpsRule:
        for rule in self.rules:
            if rule.signature_token == token:
                return rule
        rule = IdpsRule(len(self.rules) + 1, token, now)
        self.rules.append(rule)
        return rule

    def receive(self, env: Envelope, now: int) -> List[Envelope]:
        if env.msg.kind != MsgKind.RULE_UPDATE:
            return []
        body = env.msg.json()
        rule = self.add_rule(body["token"], now)
        return [self.send(CMS_NAME, MsgKind.ACK,
                          json_payload({"vm": body.get("vm"), "rule_id": rule.rule_id,
                                        "token": rule.signature_token}), now)]

    def filter(self, packets: Sequence[SimPacket]) -> Tuple[List[SimPacket], List[SimPacket]]:
        return idps_filter(packets, self.rules)

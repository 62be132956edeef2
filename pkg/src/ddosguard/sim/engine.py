"""Tick-driven simulation loop.

Per tick: (1) generate legitimate and attack traffic, (2) firewall marks and
polices, the IDPS filters, (3) agents observe what reached their VM and
emit messages, (4) the bus delivers last tick's messages, (5) the CMS
handles them and runs its timers, (6) the mining center polls its jobs,
(7) a metrics row per VM is appended.  Stages 1-3 are independent per VM
and may run on a thread pool; everything they emit is merged in VM order
before the bus sorts it, so both modes produce identical output.
"""

from __future__ import annotations

import logging
import zlib
from collections import Counter
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Dict, List, Optional

import numpy as np

from ..agent import Agent
from ..cms import ControlCenter
from ..firewall import Firewall, Idps
from ..mining import MiningCenter
from ..traffic import SimPacket, generate_tick, inject_attack
from .bus import CMS_NAME, FIREWALL_NAME, IDPS_NAME, MINING_NAME, Envelope, agent_name, bus_deliver
from .config import ScenarioConfig, validate
from .metrics import MetricsRow, MetricsSeries

log = logging.getLogger(__name__)


def shared_key(seed: int, name: str) -> int:
    return zlib.crc32(f"{seed}/{name}".encode())


@dataclass
class PacketTrace:
    """What one VM's data plane saw in one tick (kept on request only)."""

    offered: List[SimPacket]
    admitted: List[SimPacket]
    passed: List[SimPacket]


@dataclass
class _VmTick:
    row: MetricsRow
    out: List[Envelope]
    clamp_changed: bool
    trace: Optional[PacketTrace]


class Simulation:
    def __init__(self, config: ScenarioConfig, keep_packets=False) -> None:
        self.config = validate(config)
        cfg = self.config
        seed = cfg.seed
        names = [CMS_NAME, FIREWALL_NAME, IDPS_NAME, MINING_NAME] + [agent_name(v) for v in cfg.vm_ids]
        self.keys = {n: shared_key(seed, n) for n in names}
        streams = np.random.SeedSequence(seed).spawn(cfg.vm_count)
        self.rngs = {vm: np.random.default_rng(s) for vm, s in zip(cfg.vm_ids, streams)}

        self.firewall = Firewall(self.keys[FIREWALL_NAME], cfg.registered_users(), cfg.capacities)
        self.idps = Idps(self.keys[IDPS_NAME])
        self.mining = MiningCenter(self.keys[MINING_NAME], cfg.mining_latency, cfg.theta)
        self.cms = ControlCenter(self.keys[CMS_NAME],
                                 {n: k for n, k in self.keys.items() if n != CMS_NAME}, cfg.cms)
        self.agents: Dict[int, Agent] = {
            vm: Agent(vm, cfg.capacity(vm), self.keys[agent_name(vm)], cfg.agent)
            for vm in cfg.vm_ids
        }
        self.series = MetricsSeries()
        self.transcript: List[tuple] = []  # (delivered_at, envelope)
        self.traces: Dict[tuple, PacketTrace] = {}  # (tick, vm) -> trace
        # True keeps every VM's packets, an iterable of ids keeps just those
        self.keep_packets = set(cfg.vm_ids) if keep_packets is True else set(keep_packets or ())
        self._pending: List[Envelope] = []
        self.now = -1

    # -- per-VM data plane ---------------------------------------------------

    def _vm_tick(self, vm: int, t: int) -> _VmTick:
        cfg = self.config
        cap = cfg.capacity(vm)
        rng = self.rngs[vm]
        packets = generate_tick(cfg.users.get(vm, []), cap, rng, vm, cfg.mtu, cfg.legit_tokens)
        for atk in cfg.attacks:
            if atk.vm_id == vm:
                packets.extend(inject_attack(atk, t, cap))
        if len(packets) > 1:
            packets = [packets[i] for i in rng.permutation(len(packets))]

        enf = self.firewall.enforce(vm, packets, t)
        passed, blocked = self.idps.filter(enf.admitted)

        offered = sum(p.size for p in packets)
        admitted = sum(p.size for p in passed)
        blocked_bytes = sum(p.size for p in blocked)
        policed = sum(p.size for p in enf.dropped)
        by_class, through = Counter(), Counter()
        for p in packets:
            by_class[p.dscp.name] += p.size
        for p in enf.admitted:
            through[p.dscp.name] += p.size

        out: List[Envelope] = []
        if cfg.agents_enabled:
            view, out = self.agents[vm].step(passed, t)
            alpha, level = view.alpha, int(view.level)
        else:
            alpha, level = 0.0, 0
        attack_pkts = sum(1 for p in passed if p.is_attack)
        row = MetricsRow(
            tick=t, vm=vm,
            offered_pct=offered / cap * 100.0,
            alpha=alpha, level=level, clamp=enf.clamp,
            admitted_pct=admitted / cap * 100.0,
            attacker_share_pct=100.0 * attack_pkts / len(passed) if passed else 0.0,
            blocked=len(blocked),
            offered_bytes=offered, admitted_bytes=admitted, policed_bytes=policed,
            blocked_bytes=blocked_bytes, police_target=enf.target_pct,
            offered_by_class=dict(by_class), passed_police_by_class=dict(through),
        )
        trace = PacketTrace(packets, enf.admitted, passed) if vm in self.keep_packets else None
        return _VmTick(row, out, enf.clamp_changed, trace)

    # -- main loop -----------------------------------------------------------

    def step(self) -> None:
        self.now += 1
        t = self.now
        cfg = self.config

        if cfg.parallel and cfg.vm_count > 1:
            with ThreadPoolExecutor(max_workers=min(8, cfg.vm_count)) as pool:
                results = list(pool.map(lambda vm: self._vm_tick(vm, t), cfg.vm_ids))
        else:
            results = [self._vm_tick(vm, t) for vm in cfg.vm_ids]

        emitted: List[Envelope] = []
        for vm, res in zip(cfg.vm_ids, results):
            emitted.extend(res.out)
            if res.clamp_changed:
                emitted.append(self.firewall.notice(vm, res.row.clamp, t))
            if res.trace is not None:
                self.traces[(t, vm)] = res.trace

        inbox = bus_deliver(self._pending, cfg.loss_rate, cfg.seed)
        kinds = Counter()
        to_cms = []
        for env in inbox:
            self.transcript.append((t, env))
            kinds[env.msg.kind.name] += 1
            rcpt = env.recipient
            if rcpt == CMS_NAME:
                to_cms.append(env)
            elif rcpt == FIREWALL_NAME:
                emitted.extend(self.firewall.receive(env, t))
            elif rcpt == IDPS_NAME:
                emitted.extend(self.idps.receive(env, t))
            elif rcpt == MINING_NAME:
                emitted.extend(self.mining.receive(env, t))
            elif rcpt.startswith("agent-"):
                if cfg.agents_enabled:
                    emitted.extend(self.agents[int(rcpt[6:])].receive(env, t))
            else:
                log.warning("no endpoint named %s", rcpt)

        for env in to_cms:
            emitted.extend(self.cms.handle(env, t))
        emitted.extend(self.cms.tick(t, cfg.vm_ids if cfg.agents_enabled else ()))
        emitted.extend(self.mining.poll(t))

        self.series.rows.extend(r.row for r in results)
        self.series.messages[t] = kinds
        self._pending = emitted

    def run(self) -> MetricsSeries:
        while self.now + 1 < self.config.duration:
            self.step()
        return self.series


def run(config: ScenarioConfig) -> MetricsSeries:
    return Simulation(config).run()

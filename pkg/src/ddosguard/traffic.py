"""Legitimate and attack workload generation plus per-user accounting."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Dict, FrozenSet, Iterable, List, Mapping, Sequence

import numpy as np

from .dscp import BEST_EFFORT, DscpClass

DEFAULT_MTU = 1500
DEFAULT_LEGIT_TOKENS = 1000


@dataclass(frozen=True)
class UserProfile:
    user_id: int
    registered: bool = False
    mean_demand: float = 5.0
    demand_stddev: float = 1.0

    def __post_init__(self) -> None:
        if self.mean_demand < 0 or self.demand_stddev < 0:
            raise ValueError(f"user {self.user_id}: demand parameters must be non-negative")


@dataclass(slots=True)
class SimPacket:
    user_id: int
    vm_id: int
    size: int
    dscp: DscpClass = BEST_EFFORT
    is_attack: bool = False
    signature: int = 0


@dataclass(frozen=True)
class AttackSpec:
    vm_id: int
    start_tick: int
    end_tick: int
    attacker_user_ids: FrozenSet[int]
    aggregate_rate: float
    signature: int
    packet_size: int = 64

    def __post_init__(self) -> None:
        if self.start_tick >= self.end_tick:
            raise ValueError("attack must start before it ends")
        if self.aggregate_rate <= 0:
            raise ValueError("attack rate must be positive")
        if not self.attacker_user_ids:
            raise ValueError("attack needs at least one attacker")
        if self.packet_size <= 0:
            raise ValueError("attack packet size must be positive")

    def active(self, tick: int) -> bool:
        return self.start_tick <= tick < self.end_tick


def _chunk(total: int, mtu: int) -> List[int]:
    full, rest = divmod(total, mtu)
    return [mtu] * full + ([rest] if rest else [])


def generate_tick(
    profiles: Sequence[UserProfile],
    vm_capacity: int,
    rng: np.random.Generator,
    vm_id: int = 0,
    mtu: int = DEFAULT_MTU,
    legit_tokens: int = DEFAULT_LEGIT_TOKENS,
) -> List[SimPacket]:
    """One tick of legitimate traffic; demand ~ Normal clipped at zero."""
    if not profiles:
        return []
    means = np.array([p.mean_demand for p in profiles], dtype=float)
    sds = np.array([p.demand_stddev for p in profiles], dtype=float)
    demand = np.maximum(rng.normal(means, sds), 0.0)
    nbytes = np.rint(demand / 100.0 * vm_capacity).astype(np.int64)
    sizes = [_chunk(int(b), mtu) for b in nbytes]
    tokens = rng.integers(1, legit_tokens + 1, size=sum(len(s) for s in sizes))
    out: List[SimPacket] = []
    k = 0
    for profile, chunks in zip(profiles, sizes):
        for size in chunks:
            out.append(SimPacket(profile.user_id, vm_id, size, BEST_EFFORT, False, int(tokens[k])))
            k += 1
    return out


def inject_attack(spec: AttackSpec, tick: int, vm_capacity: int) -> List[SimPacket]:
    if not spec.active(tick):
        return []
    total = int(round(spec.aggregate_rate / 100.0 * vm_capacity))
    attackers = sorted(spec.attacker_user_ids)
    return [
        SimPacket(attackers[i % len(attackers)], spec.vm_id, size, BEST_EFFORT, True, spec.signature)
        for i, size in enumerate(_chunk(total, spec.packet_size))
    ]


def load_percent(packets: Iterable[SimPacket], vm_capacity: int) -> float:
    return sum(p.size for p in packets) / vm_capacity * 100.0


@dataclass
class UsageCounter:
    bytes_by_user: Dict[int, int] = field(default_factory=dict)

    def add(self, packets: Iterable[SimPacket]) -> None:
        counts = self.bytes_by_user
        for p in packets:
            counts[p.user_id] = counts.get(p.user_id, 0) + p.size


def top_consumers(usage: Mapping[int, int], n: int) -> List[int]:
    if n < 1:
        raise ValueError("n must be at least 1")
    ranked = sorted(usage.items(), key=lambda kv: (-kv[1], kv[0]))
    return [user for user, _ in ranked[:n]]

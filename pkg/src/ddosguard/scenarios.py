"""Canonical demonstration scenarios.

Both use ten VMs for ten minutes with an attack on VM 3 starting at
t = 300 s.  Scenario ``one`` has the mining center answer in 15 s (inside
the 30 s detection deadline); scenario ``two`` takes 45 s, so the control
center falls back to stepped policing.
"""

from __future__ import annotations

from .agent import AgentParams
from .cms import CmsParams
from .sim.config import ATTACKER_BASE, ScenarioConfig, make_users, validate
from .traffic import AttackSpec

ATTACKED_VM = 3
ATTACK_START = 300
ATTACK_SIGNATURE = 4242
SCENARIO_LATENCY = {"one": 15, "two": 45}


def canonical_config(scenario: str = "one", seed: int = 7, duration: int = 600) -> ScenarioConfig:
    if scenario not in SCENARIO_LATENCY:
        raise ValueError(f"unknown scenario {scenario!r}; choose one of {sorted(SCENARIO_LATENCY)}")
    vm_count = 10
    capacity = 150_000
    attack = AttackSpec(
        vm_id=ATTACKED_VM,
        start_tick=ATTACK_START,
        end_tick=duration,
        attacker_user_ids=frozenset(ATTACKER_BASE + j for j in range(20)),
        aggregate_rate=40.0,
        signature=ATTACK_SIGNATURE,
        packet_size=64,
    )
    return validate(ScenarioConfig(
        duration=duration,
        seed=seed,
        vm_count=vm_count,
        capacities={vm: capacity for vm in range(vm_count)},
        users={vm: make_users(vm, 10, 3, 5.0, 1.0) for vm in range(vm_count)},
        attacks=[attack],
        agent=AgentParams(),
        cms=CmsParams(),
        theta=0.5,
        mining_latency=SCENARIO_LATENCY[scenario],
    ))

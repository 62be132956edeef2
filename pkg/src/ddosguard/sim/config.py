"""Scenario configuration: dataclasses plus an INI reader/writer.

File layout (every section and key optional unless noted)::

    [scenario]      duration, seed, vm_count, capacity, mtu, legit_tokens,
                    loss, parallel, agents
    [predictor]     x, window, hysteresis, buffer, report_period, report_size
    [mining]        theta, latency
    [cms]           deadline, release_interval, keepalive
    [users]         count, registered, mean_demand, demand_stddev
    [vm.<id>]       per-VM overrides of capacity and the [users] keys
    [attack.<name>] vm, start, end, attackers, rate, signature, packet_size

Legitimate user ids are ``vm * 1000 + i``; attacker ids start at 1,000,000.
"""

from __future__ import annotations

import configparser
import io
from dataclasses import dataclass, field, replace
from typing import Dict, List

from ..agent import AgentParams
from ..cms import CmsParams
from ..traffic import AttackSpec, UserProfile

ATTACKER_BASE = 1_000_000
MAX_USERS_PER_VM = 1000


class ConfigError(ValueError):
    def __init__(self, path: str, message: str) -> None:
        super().__init__(f"{path}: {message}")
        self.path = path


@dataclass
class ScenarioConfig:
    duration: int = 600
    seed: int = 1
    vm_count: int = 1
    capacities: Dict[int, int] = field(default_factory=dict)
    users: Dict[int, List[UserProfile]] = field(default_factory=dict)
    attacks: List[AttackSpec] = field(default_factory=list)
    agent: AgentParams = field(default_factory=AgentParams)
    cms: CmsParams = field(default_factory=CmsParams)
    theta: float = 0.5
    mining_latency: int = 15
    mtu: int = 1500
    legit_tokens: int = 1000
    loss_rate: float = 0.0
    parallel: bool = False
    agents_enabled: bool = True

    @property
    def vm_ids(self) -> List[int]:
        return list(range(self.vm_count))

    def capacity(self, vm: int) -> int:
        return self.capacities[vm]

    def registered_users(self) -> set:
        return {u.user_id for profiles in self.users.values() for u in profiles if u.registered}

    def with_overrides(self, **changes) -> "ScenarioConfig":
        cfg = replace(self, **changes)
        validate(cfg)
        return cfg


def validate(cfg: ScenarioConfig) -> ScenarioConfig:
    if cfg.duration <= 0:
        raise ConfigError("scenario.duration", "must be positive")
    if cfg.vm_count < 1:
        raise ConfigError("scenario.vm_count", "need at least one VM")
    if not 0.0 <= cfg.loss_rate <= 1.0:
        raise ConfigError("scenario.loss", "must lie in [0, 1]")
    if cfg.mtu <= 0 or cfg.mtu > 0xFFFF:
        raise ConfigError("scenario.mtu", "must lie in [1, 65535]")
    if not 1 <= cfg.legit_tokens < 0xFFFF:
        raise ConfigError("scenario.legit_tokens", "must lie in [1, 65534]")
    for vm in cfg.vm_ids:
        if cfg.capacities.get(vm, 0) <= 0:
            raise ConfigError(f"vm.{vm}.capacity", "must be positive")
    for vm in cfg.users:
        if vm not in cfg.vm_ids:
            raise ConfigError(f"vm.{vm}", "unknown VM id")
    if not 0.0 <= cfg.agent.x <= 1.0:
        raise ConfigError("predictor.x", "must lie in [0, 1]")
    if cfg.agent.window < 2:
        raise ConfigError("predictor.window", "needs at least 2 samples")
    for key in ("hysteresis", "buffer_capacity", "report_period", "report_size"):
        if getattr(cfg.agent, key) < 1:
            raise ConfigError(f"predictor.{key}", "must be at least 1")
    if not 0.0 < cfg.theta <= 1.0:
        raise ConfigError("mining.theta", "must lie in (0, 1]")
    if cfg.mining_latency < 0:
        raise ConfigError("mining.latency", "must be non-negative")
    if cfg.cms.detect_deadline < 1 or cfg.cms.release_interval < 1:
        raise ConfigError("cms", "deadline and release_interval must be at least 1")
    for i, atk in enumerate(cfg.attacks):
        if atk.vm_id not in cfg.vm_ids:
            raise ConfigError(f"attack[{i}].vm", f"VM {atk.vm_id} does not exist")
        if not cfg.legit_tokens < atk.signature <= 0xFFFF:
            raise ConfigError(f"attack[{i}].signature",
                              f"must lie in ({cfg.legit_tokens}, 65535] to stay distinct")
        if atk.packet_size > 0xFFFF:
            raise ConfigError(f"attack[{i}].packet_size", "must fit in 16 bits")
    return cfg


def make_users(vm: int, count: int, registered: int, mean: float, sd: float) -> List[UserProfile]:
    return [UserProfile(vm * MAX_USERS_PER_VM + i, i < registered, mean, sd) for i in range(count)]


_SCHEMA = {
    "scenario": {"duration": int, "seed": int, "vm_count": int, "capacity": int, "mtu": int,
                 "legit_tokens": int, "loss": float, "parallel": bool, "agents": bool},
    "predictor": {"x": float, "window": int, "hysteresis": int, "buffer": int,
                  "report_period": int, "report_size": int},
    "mining": {"theta": float, "latency": int},
    "cms": {"deadline": int, "release_interval": int, "keepalive": int},
    "users": {"count": int, "registered": int, "mean_demand": float, "demand_stddev": float},
    "vm": {"capacity": int, "count": int, "registered": int, "mean_demand": float,
           "demand_stddev": float},
    "attack": {"vm": int, "start": int, "end": int, "attackers": int, "rate": float,
               "signature": int, "packet_size": int},
}
_REQUIRED_ATTACK = ("vm", "start", "rate", "signature")


def _read_section(parser, section: str, kind: str) -> dict:
    out = {}
    for key, raw in parser.items(section):
        path = f"{section}.{key}"
        typ = _SCHEMA[kind].get(key)
        if typ is None:
            raise ConfigError(path, "unknown key")
        try:
            out[key] = parser.getboolean(section, key) if typ is bool else typ(raw)
        except ValueError:
            raise ConfigError(path, f"expected {typ.__name__}, got {raw!r}") from None
    return out


def parse_config(text: str) -> ScenarioConfig:
    parser = configparser.ConfigParser(inline_comment_prefixes=(";", "#"),
                                       default_section="__none__")
    try:
        parser.read_string(text)
    except configparser.Error as exc:
        raise ConfigError("<file>", str(exc).splitlines()[0]) from None

    sections = {}
    vm_sections, attack_sections = {}, {}
    for name in parser.sections():
        head, _, tail = name.partition(".")
        if head == "vm" and tail:
            try:
                vm_sections[int(tail)] = _read_section(parser, name, "vm")
            except ValueError:
                raise ConfigError(name, "VM section must be [vm.<integer>]") from None
        elif head == "attack" and tail:
            attack_sections[tail] = _read_section(parser, name, "attack")
        elif name in _SCHEMA and name not in ("vm", "attack"):
            sections[name] = _read_section(parser, name, name)
        else:
            raise ConfigError(name, "unknown section")

    sc = sections.get("scenario", {})
    pr = sections.get("predictor", {})
    mi = sections.get("mining", {})
    cm = sections.get("cms", {})
    us = sections.get("users", {})

    vm_count = sc.get("vm_count", 1)
    default_cap = sc.get("capacity", 150_000)
    capacities, users = {}, {}
    for vm in range(vm_count):
        over = {**us, **vm_sections.get(vm, {})}
        capacities[vm] = over.get("capacity", default_cap)
        count = over.get("count", 10)
        if not 0 <= count <= MAX_USERS_PER_VM:
            raise ConfigError(f"vm.{vm}.count", f"must lie in [0, {MAX_USERS_PER_VM}]")
        try:
            users[vm] = make_users(vm, count, over.get("registered", 0),
                                   over.get("mean_demand", 5.0), over.get("demand_stddev", 1.0))
        except ValueError as exc:
            raise ConfigError(f"vm.{vm}", str(exc)) from None
    for vm in vm_sections:
        if vm >= vm_count:
            raise ConfigError(f"vm.{vm}", "VM id beyond scenario.vm_count")

    duration = sc.get("duration", 600)
    attacks = []
    for idx, (name, a) in enumerate(sorted(attack_sections.items())):
        for key in _REQUIRED_ATTACK:
            if key not in a:
                raise ConfigError(f"attack.{name}.{key}", "required")
        n = a.get("attackers", 20)
        try:
            attacks.append(AttackSpec(
                vm_id=a["vm"], start_tick=a["start"], end_tick=a.get("end", duration),
                attacker_user_ids=frozenset(ATTACKER_BASE + idx * 10_000 + j for j in range(n)),
                aggregate_rate=a["rate"], signature=a["signature"],
                packet_size=a.get("packet_size", 64)))
        except ValueError as exc:
            raise ConfigError(f"attack.{name}", str(exc)) from None

    defaults = AgentParams()
    cfg = ScenarioConfig(
        duration=duration,
        seed=sc.get("seed", 1),
        vm_count=vm_count,
        capacities=capacities,
        users=users,
        attacks=attacks,
        agent=AgentParams(
            x=pr.get("x", defaults.x), window=pr.get("window", defaults.window),
            hysteresis=pr.get("hysteresis", defaults.hysteresis),
            buffer_capacity=pr.get("buffer", defaults.buffer_capacity),
            report_period=pr.get("report_period", defaults.report_period),
            report_size=pr.get("report_size", defaults.report_size)),
        cms=CmsParams(detect_deadline=cm.get("deadline", 30),
                      release_interval=cm.get("release_interval", 30),
                      keepalive_interval=cm.get("keepalive", 60)),
        theta=mi.get("theta", 0.5),
        mining_latency=mi.get("latency", 15),
        mtu=sc.get("mtu", 1500),
        legit_tokens=sc.get("legit_tokens", 1000),
        loss_rate=sc.get("loss", 0.0),
        parallel=sc.get("parallel", False),
        agents_enabled=sc.get("agents", True),
    )
    return validate(cfg)


def load_config(path) -> ScenarioConfig:
    with open(path) as fh:
        return parse_config(fh.read())


def dump_config(cfg: ScenarioConfig) -> str:
    """Render a config whose users follow the generated layout back to INI."""
    parser = configparser.ConfigParser()
    parser["scenario"] = {
        "duration": cfg.duration, "seed": cfg.seed, "vm_count": cfg.vm_count,
        "capacity": cfg.capacities[0], "mtu": cfg.mtu, "legit_tokens": cfg.legit_tokens,
        "loss": cfg.loss_rate, "parallel": cfg.parallel, "agents": cfg.agents_enabled,
    }
    a = cfg.agent
    parser["predictor"] = {"x": a.x, "window": a.window, "hysteresis": a.hysteresis,
                           "buffer": a.buffer_capacity, "report_period": a.report_period,
                           "report_size": a.report_size}
    parser["mining"] = {"theta": cfg.theta, "latency": cfg.mining_latency}
    parser["cms"] = {"deadline": cfg.cms.detect_deadline,
                     "release_interval": cfg.cms.release_interval,
                     "keepalive": cfg.cms.keepalive_interval}
    for vm in cfg.vm_ids:
        profiles = cfg.users.get(vm, [])
        sec = {"capacity": cfg.capacities[vm], "count": len(profiles),
               "registered": sum(p.registered for p in profiles)}
        if profiles:
            sec["mean_demand"] = profiles[0].mean_demand
            sec["demand_stddev"] = profiles[0].demand_stddev
        parser[f"vm.{vm}"] = sec
    for i, atk in enumerate(cfg.attacks):
        parser[f"attack.a{i:02d}"] = {
            "vm": atk.vm_id, "start": atk.start_tick, "end": atk.end_tick,
            "attackers": len(atk.attacker_user_ids), "rate": atk.aggregate_rate,
            "signature": atk.signature, "packet_size": atk.packet_size}
    buf = io.StringIO()
    parser.write(buf)
    return buf.getvalue()

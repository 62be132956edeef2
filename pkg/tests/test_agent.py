import statistics
from collections import deque

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ddosguard.agent import Agent, AgentParams, buffer_capture
from ddosguard.predictor import AgingPredictor, AlertLevel
from ddosguard.sim.bus import CMS_NAME, Endpoint, agent_name
from ddosguard.traffic import SimPacket
from ddosguard.wire import MsgKind, Source, json_payload

CAP = 10_000


def tick_packets(load_pct, user=1):
    size = int(round(load_pct / 100 * CAP))
    return [SimPacket(user, 0, size)] if size else []


def primed_agent(alpha=70.0, lo=60.0, hi=80.0, **params):
    agent = Agent(0, CAP, key=5, params=AgentParams(**params))
    window = deque([lo, hi] * 30, maxlen=60)
    agent.predictor = AgingPredictor(agent.params.x, s=alpha, window_size=60, window=window)
    return agent


def kinds(envs):
    return [e.msg.kind for e in envs]


# -- buffer ------------------------------------------------------------------------

def test_ring_eviction():
    buf = deque(maxlen=3)
    buffer_capture(buf, [SimPacket(i, 0, 1) for i in range(5)], AlertLevel.LEVEL1)
    assert [p.user_id for p in buf] == [2, 3, 4]


def test_normal_level_leaves_buffer_alone():
    buf = deque(maxlen=3)
    buffer_capture(buf, [SimPacket(1, 0, 1)], AlertLevel.NORMAL)
    assert not buf


@given(st.integers(1, 40), st.lists(st.lists(st.integers(0, 999), max_size=15), max_size=12))
def test_buffer_is_suffix_of_insertions(cap, batches):
    buf = deque(maxlen=cap)
    seen = []
    for batch in batches:
        pk = [SimPacket(u, 0, 1) for u in batch]
        buffer_capture(buf, pk, AlertLevel.LEVEL2)
        seen.extend(pk)
    assert list(buf) == seen[-cap:] if seen else not buf


# -- step --------------------------------------------------------------------------

def test_quiet_network_only_reports():
    agent = Agent(0, CAP, key=5)
    out = []
    for t in range(120):
        out += agent.step(tick_packets(50.0), t)[1]
    assert set(kinds(out)) == {MsgKind.HIGH_USERS_REPORT}
    assert len(out) == 3  # t = 30, 60, 90


def test_level_jump_emits_every_crossed_alert():
    agent = primed_agent()
    view, out = agent.step(tick_packets(95.0), 100)
    assert view.level == AlertLevel.LEVEL2
    assert (view.alpha, view.beta) == (70.0, 10.0)
    assert kinds(out) == [MsgKind.ALERT1, MsgKind.ALERT2, MsgKind.TRAFFIC_BUFFER]
    assert not agent.buffer


def test_level3_jump_sequence_and_payload():
    agent = primed_agent()
    _, out = agent.step(tick_packets(100.0), 7)
    assert kinds(out) == [MsgKind.ALERT1, MsgKind.ALERT2, MsgKind.TRAFFIC_BUFFER, MsgKind.ALERT3]
    body = out[3].msg.json()
    assert body == {"vm": 0, "tick": 7, "level": 3, "alpha": 70.0, "beta": 10.0, "load": 100.0,
                    "snapshot": 70.0}


def test_sustained_load_does_not_repeat_alerts():
    agent = primed_agent()
    out = []
    for t in range(5):
        out += agent.step(tick_packets(100.0), t + 1)[1]
    assert kinds(out).count(MsgKind.ALERT3) == 1


def test_messages_go_to_cms_with_gapless_seq():
    agent = Agent(3, CAP, key=5)
    rng = np.random.default_rng(1)
    out = []
    for t in range(400):
        out += agent.step(tick_packets(float(np.clip(rng.normal(50, 8), 0, 100))), t)[1]
    assert out
    assert all(e.recipient == CMS_NAME and e.sender == agent_name(3) for e in out)
    assert [e.msg.seq for e in out] == list(range(len(out)))
    assert all(e.msg.source == Source.AGENT and e.msg.auth_key == 5 for e in out)


def test_warm_up_suppresses_classification():
    agent = Agent(0, CAP, key=1, params=AgentParams(window=10))
    for t in range(9):
        view, out = agent.step(tick_packets(10.0 if t % 2 else 90.0), t)
        assert view.level == AlertLevel.NORMAL and not out


def test_hysteresis_holds_level():
    agent = primed_agent(hysteresis=3)
    agent.step(tick_packets(100.0), 1)
    levels = [agent.step(tick_packets(40.0), t)[0].level for t in range(2, 6)]
    assert levels == [AlertLevel.LEVEL3, AlertLevel.LEVEL3, AlertLevel.NORMAL, AlertLevel.NORMAL]


def test_snapshot_taken_on_escalation():
    agent = primed_agent()
    agent.step(tick_packets(100.0), 1)
    assert agent.snapshots == [(1, 70.0)]
    assert agent.predictor.has_snapshot


class _Cms(Endpoint):
    source = Source.CONTROL_CENTER


def test_restore_instruction_rolls_back():
    agent = primed_agent()
    agent.step(tick_packets(100.0), 1)
    for t in range(2, 6):
        agent.step(tick_packets(100.0), t)
    assert agent.predictor.s > 90
    cms = _Cms(CMS_NAME, 0)
    ack = cms.send(agent_name(0), MsgKind.ACK, json_payload({"vm": 0, "found": True,
                                                            "restore": True}), 6)
    agent.receive(ack, 7)
    assert agent.predictor.s == 70.0
    assert agent.restored == [(7, 70.0)]
    assert not agent.incident_open


def test_negative_verdict_discards_snapshot():
    agent = primed_agent()
    agent.step(tick_packets(100.0), 1)
    cms = _Cms(CMS_NAME, 0)
    agent.receive(cms.send(agent_name(0), MsgKind.ACK,
                           json_payload({"vm": 0, "found": False, "restore": False}), 2), 3)
    assert not agent.predictor.has_snapshot
    assert agent.restored == []


def test_bandwidth_notice_is_counted():
    agent = Agent(0, CAP, key=1)
    cms = _Cms(CMS_NAME, 0)
    agent.receive(cms.send(agent_name(0), MsgKind.BANDWIDTH_CHANGE_NOTICE,
                           json_payload({"vm": 0, "clamp": 1.0}), 1), 2)
    assert agent.received["BANDWIDTH_CHANGE_NOTICE"] == 1


# -- reference model -------------------------------------------------------------------

def reference_kinds(loads, params):
    """Straight-line restatement of the agent's per-tick rules."""
    s, window, level, quiet, buffered = None, [], 0, [], 0
    out = []
    for t, load in enumerate(loads):
        observed = 0
        if len(window) >= params.window:
            alpha = s
            beta = min((100 - alpha) / 3, statistics.stdev(window))
            if beta == 0:
                observed = 3 if load > alpha else 0
            else:
                observed = sum(load >= alpha + k * beta for k in (1, 2, 3))
        prev = level
        if observed >= level:
            level, quiet = observed, []
        else:
            quiet.append(observed)
            if len(quiet) == params.hysteresis:
                level, quiet = max(quiet), []
        if level >= 1 and load > 0:
            buffered += 1
        if level > prev:
            for lv in range(prev + 1, level + 1):
                out.append(MsgKind(lv))
                if lv >= 2 and buffered:
                    out.append(MsgKind.TRAFFIC_BUFFER)
                    buffered = 0
        elif level == 0 and prev > 0:
            buffered = 0
        if t > 0 and t % params.report_period == 0:
            out.append(MsgKind.HIGH_USERS_REPORT)
        s = load if s is None else params.x * s + (1 - params.x) * load
        window = (window + [load])[-params.window:]
    return out


@settings(max_examples=40, deadline=None)
@given(st.lists(st.integers(0, 100), min_size=1, max_size=150), st.integers(2, 12),
       st.integers(1, 6), st.sampled_from([0.3, 0.5, 0.9]))
def test_matches_reference_model(loads, window, hysteresis, x):
    params = AgentParams(x=x, window=window, hysteresis=hysteresis, report_period=25)
    agent = Agent(0, CAP, key=1, params=params)
    out = []
    for t, load in enumerate(loads):
        out += agent.step(tick_packets(float(load)), t)[1]
    assert kinds(out) == reference_kinds([float(v) for v in loads], params)


def test_load_is_clipped_to_capacity():
    agent = Agent(0, CAP, key=1)
    view, _ = agent.step(tick_packets(130.0), 0)
    assert view.load == 100.0


@pytest.mark.parametrize("period", [1, 7])
def test_report_period(period):
    agent = Agent(0, CAP, key=1, params=AgentParams(report_period=period, report_size=2))
    out = []
    for t in range(15):
        out += agent.step(tick_packets(20.0, user=t % 3), t)[1]
    reports = [e for e in out if e.msg.kind == MsgKind.HIGH_USERS_REPORT]
    assert len(reports) == len([t for t in range(1, 15) if t % period == 0])
    assert len(reports[-1].msg.json()["users"]) == 2

import pytest

from ddosguard.agent import Agent
from ddosguard.cms import CmsParams, ControlCenter
from ddosguard.sim.bus import CMS_NAME, FIREWALL_NAME, IDPS_NAME, MINING_NAME, Endpoint, agent_name
from ddosguard.traffic import SimPacket
from ddosguard.wire import MsgKind, Source, encode_packet_batch, json_payload

KEYS = {agent_name(0): 11, FIREWALL_NAME: 22, IDPS_NAME: 33, MINING_NAME: 44}


class Peer(Endpoint):
    def __init__(self, name, source):
        super().__init__(name, KEYS.get(name, 0))
        self.source = source


@pytest.fixture
def cms():
    return ControlCenter(99, KEYS)


@pytest.fixture
def agent():
    return Peer(agent_name(0), Source.AGENT)


@pytest.fixture
def mining():
    return Peer(MINING_NAME, Source.MINING_CENTER)


def alert(agent, level, tick, alpha=40.0, snapshot=None):
    body = {"vm": 0, "tick": tick, "level": level, "alpha": alpha, "beta": 5.0, "load": 90.0}
    if snapshot is not None:
        body["snapshot"] = snapshot
    return agent.send(CMS_NAME, MsgKind(level), json_payload(body), tick)


def buffer_msgs(agent, tick, batch=1, n=20):
    packets = [SimPacket(1_000_000, 0, 64, signature=4242) for _ in range(n)]
    return [agent.send(CMS_NAME, MsgKind.TRAFFIC_BUFFER, f, tick)
            for f in encode_packet_batch(0, batch, packets)]


def result(mining, request, tick, found=True):
    body = {"vm": 0, "request": request, "opened_at": tick, "found": found}
    if found:
        body.update(token=4242, sources=[1_000_000], support=1.0)
    return mining.send(CMS_NAME, MsgKind.PATTERN_RESULT, json_payload(body), tick)


def kinds_to(out):
    return [(e.recipient, e.msg.kind) for e in out]


def test_bad_key_is_dropped_and_counted(cms):
    rogue = Endpoint(agent_name(0), 12345)
    rogue.source = Source.AGENT
    env = rogue.send(CMS_NAME, MsgKind.ALERT3, json_payload({"vm": 0}), 1)
    assert cms.handle(env, 2) == []
    assert cms.counters["auth_failure"] == 1


def test_unknown_sender_rejected(cms):
    stranger = Peer("agent-9", Source.AGENT)
    assert cms.handle(alert(stranger, 1, 1), 2) == []
    assert cms.counters["auth_failure"] == 1


def test_inbound_accounting(cms, agent):
    good = alert(agent, 1, 1)
    bad = Peer(agent_name(0), Source.AGENT)
    bad.key = 0
    for env in (good, alert(bad, 1, 2), alert(agent, 2, 3)):
        cms.handle(env, 4)
    c = cms.counters
    assert c["inbound"] == c["dispatched"] + c["auth_failure"] + c["unknown_kind"] == 3


def test_alert3_starts_stepped_policing(cms, agent):
    cms.handle(alert(agent, 1, 299, alpha=41.0), 300)
    out = cms.handle(alert(agent, 3, 301, alpha=60.0, snapshot=41.0), 302)
    assert kinds_to(out) == [(FIREWALL_NAME, MsgKind.POLICING_COMMAND)]
    cmd = out[0].msg.json()
    assert cmd["target"] == 41.0 and cmd["start"] == 301
    assert cmd["steps"] == [1.0, 0.75, 0.5, 0.25, 0.0] and cmd["clamp"] == 1.0
    assert out[0].msg.auth_key == KEYS[FIREWALL_NAME]


def test_release_steps_every_interval(cms, agent):
    cms.handle(alert(agent, 3, 100, snapshot=30.0), 101)
    sent = {}
    for t in range(101, 300):
        for env in cms.tick(t):
            if env.msg.kind == MsgKind.POLICING_COMMAND:
                sent[t] = env.msg.json()["clamp"]
    assert sent == {130: 0.75, 160: 0.5, 190: 0.25, 220: 0.0}
    assert 0 not in cms.schedules


def test_alert3_during_release_is_ignored(cms, agent):
    cms.handle(alert(agent, 3, 100, snapshot=30.0), 101)
    assert cms.handle(alert(agent, 3, 140, snapshot=50.0), 141) == []
    assert cms.schedules[0].target == 30.0


def test_buffer_opens_mining_job(cms, agent):
    out = []
    for env in buffer_msgs(agent, 10):
        out += cms.handle(env, 11)
    assert kinds_to(out) == [(MINING_NAME, MsgKind.PATTERN_REQUEST)]
    assert cms.jobs[0].pending == {1: 41}
    assert cms.ledger[0].incident == 1


def test_positive_result_on_time(cms, agent, mining):
    cms.handle(alert(agent, 3, 10, snapshot=35.0), 11)
    for env in buffer_msgs(agent, 10):
        cms.handle(env, 11)
    out = cms.handle(result(mining, 1, 26), 27)
    assert kinds_to(out) == [(IDPS_NAME, MsgKind.RULE_UPDATE),
                             (FIREWALL_NAME, MsgKind.POLICING_COMMAND),
                             (agent_name(0), MsgKind.ACK)]
    assert out[1].msg.json() == {"vm": 0, "cancel": True}
    assert out[2].msg.json()["restore"] is True
    assert 0 not in cms.schedules and 0 not in cms.jobs


def test_late_result_keeps_release(cms, agent, mining):
    cms.handle(alert(agent, 3, 10, snapshot=35.0), 11)
    for env in buffer_msgs(agent, 10):
        cms.handle(env, 11)
    cms.tick(40)
    assert not cms.jobs[0].expired
    cms.tick(41)
    assert cms.jobs[0].expired
    out = cms.handle(result(mining, 1, 56), 57)
    assert kinds_to(out) == [(IDPS_NAME, MsgKind.RULE_UPDATE), (agent_name(0), MsgKind.ACK)]
    assert out[1].msg.json()["restore"] is False
    assert 0 in cms.schedules


def test_negative_waits_for_other_requests(cms, agent, mining):
    for batch in (1, 2):
        for env in buffer_msgs(agent, 10 + batch, batch=batch):
            cms.handle(env, 11 + batch)
    assert cms.handle(result(mining, 1, 20, found=False), 21) == []
    out = cms.handle(result(mining, 2, 22), 23)
    assert (IDPS_NAME, MsgKind.RULE_UPDATE) in kinds_to(out)


def test_unknown_request_is_stale(cms, mining):
    assert cms.handle(result(mining, 7, 5), 6) == []
    assert cms.events[-1].what == "stale_result"


def test_high_users_forwarded_to_firewall(cms, agent):
    env = agent.send(CMS_NAME, MsgKind.HIGH_USERS_REPORT, json_payload({"vm": 0, "users": [3, 1]}), 30)
    out = cms.handle(env, 31)
    assert kinds_to(out) == [(FIREWALL_NAME, MsgKind.HIGH_USERS_REPORT)]
    assert cms.high_consumers[0] == [3, 1]


def test_bandwidth_notice_forwarded_to_agent(cms):
    fw = Peer(FIREWALL_NAME, Source.FIREWALL)
    env = fw.send(CMS_NAME, MsgKind.BANDWIDTH_CHANGE_NOTICE, json_payload({"vm": 0, "clamp": 0.5}), 3)
    out = cms.handle(env, 4)
    assert kinds_to(out) == [(agent_name(0), MsgKind.BANDWIDTH_CHANGE_NOTICE)]
    assert out[0].msg.auth_key == KEYS[agent_name(0)]


def test_keepalive(cms):
    params = CmsParams(keepalive_interval=10)
    c = ControlCenter(1, KEYS, params)
    assert c.tick(5, [0]) == []
    assert kinds_to(c.tick(10, [0])) == [(agent_name(0), MsgKind.ALLOHA)]


def test_quiescent_without_input(cms):
    for t in range(1, 59):
        assert cms.tick(t, [0]) == []


def test_four_message_transcript():
    """Alert2, buffer, pattern, IDPS ack: each step traced by hand."""
    cms = ControlCenter(99, KEYS)
    ag = Agent(0, 10_000, KEYS[agent_name(0)])
    mining = Peer(MINING_NAME, Source.MINING_CENTER)
    idps = Peer(IDPS_NAME, Source.IDPS)
    body = {"vm": 0, "tick": 300, "level": 2, "alpha": 62.0, "beta": 9.0, "load": 85.0,
            "snapshot": 45.0}
    script = [
        (ag.send(CMS_NAME, MsgKind.ALERT2, json_payload(body), 300), 301),
        (buffer_msgs(ag, 300)[0], 301),
        (result(mining, 1, 316), 317),
        (idps.send(CMS_NAME, MsgKind.ACK, json_payload({"vm": 0, "rule_id": 1, "token": 4242}),
                   318), 319),
    ]
    replies = [kinds_to(cms.handle(env, now)) for env, now in script]
    assert replies == [
        [],
        [(MINING_NAME, MsgKind.PATTERN_REQUEST)],
        [(IDPS_NAME, MsgKind.RULE_UPDATE), (agent_name(0), MsgKind.ACK)],
        [],
    ]
    assert [e.what for e in cms.events] == ["alert2", "mining_job", "rule_update", "restore_alpha"]
    assert cms.events[-1].detail == 45.0
    assert cms.counters["acks"] == 1 and cms.counters["dispatched"] == 4

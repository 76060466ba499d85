import json
import struct

import pytest

from uavzt import crypto_core as cc
from uavzt.sim_harness import Scenario, ScriptError, World, load_script, run_scenario, scenario_suite

SUITE = {s.name: s for s in scenario_suite()}


@pytest.fixture(scope="module")
def reports():
    return {name: s.run() for name, s in SUITE.items()}


def test_suite_covers_expected_scenarios():
    assert set(SUITE) == {
        "honest-auth", "replay", "stale-timestamp", "wrong-password", "tamper-each-field",
        "impersonation-with-random-keys", "capture-and-cross-forge", "low-reputation-lockout",
        "high-reputation-skip", "gateway-default-deny",
    }


def test_honest_auth(reports):
    r = reports["honest-auth"]
    out = r.outcomes()
    assert out[:2] == ["forward_to_kgc", "ok"]
    assert out[2].startswith("Session:")
    assert r.reputations == {"A": 1}


def test_replay_detected(reports):
    r = reports["replay"]
    assert r.outcomes("replay") == ["ReplayedNonce"]
    assert r.reputations == {"A": 0}


def test_stale_and_wrong_password(reports):
    assert reports["stale-timestamp"].outcomes("auth") == ["StaleTimestamp"]
    assert reports["wrong-password"].outcomes("auth") == ["BadPassword"]
    assert reports["wrong-password"].reputations == {"A": -1}


def test_tamper_each_field(reports):
    r = reports["tamper-each-field"]
    tampers = r.outcomes("tamper")
    assert len(tampers) == 9 and set(tampers) == {"IntegrityFailure"}
    # each tamper costs one reputation point; the honest auth earned one
    assert r.reputations == {"A": 1 - 9}


def test_impersonation_fails(reports):
    r = reports["impersonation-with-random-keys"]
    assert r.outcomes("inject") == ["IntegrityFailure", "IntegrityFailure"]
    assert r.reputations == {"B": -2}


def test_capture_does_not_enable_cross_forgery(reports):
    r = reports["capture-and-cross-forge"]
    assert r.outcomes("inject") == ["IntegrityFailure"]
    assert r.reputations["A"] == 0


def test_low_reputation_lockout(reports):
    r = reports["low-reputation-lockout"]
    assert r.outcomes("auth") == ["BadPassword"] * 4
    assert [e["rep_after"] for e in r.events if e["op"] == "auth"] == [-1, -2, -3, -4]
    assert r.outcomes("gate") == ["reject"]
    assert r.outcomes("register")[-1] == "reject"


def test_high_reputation_skip(reports):
    r = reports["high-reputation-skip"]
    assert r.outcomes("auth") == ["ok"] * 6
    assert r.reputations == {"A": 6}
    assert r.outcomes("gate") == ["skip_registration"]
    assert r.outcomes("register")[-1] == "skip_registration"


def test_gateway_default_deny(reports):
    out = reports["gateway-default-deny"].outcomes("connect")
    assert out[0] == "Denied" and out[1].startswith("Session:") and out[2] == "Denied"


def test_determinism_across_runs():
    for s in SUITE.values():
        assert s.run().to_json() == s.run().to_json(), s.name


def test_different_seed_changes_report():
    s = SUITE["honest-auth"]
    assert s.run(seed=1).to_json() != s.run(seed=2).to_json()


def test_adversary_sees_every_open_frame_and_no_secure_frame():
    w = World(seed=3)
    run_scenario(w, SUITE["capture-and-cross-forge"].steps + SUITE["honest-auth"].steps[1:])
    assert w.adversary.observed == w.open.delivered
    assert w.secure.delivered
    for f in w.secure.delivered:
        assert f not in w.adversary.observed
    assert all(f.channel == "open" for f in w.adversary.observed)


def test_adversary_holds_no_master_secret():
    w = World(seed=3)
    run_scenario(w, SUITE["capture-and-cross-forge"].steps)
    held = vars(w.adversary)
    assert set(held) == {"observed", "captured"}
    ssk_attr = [k for k in vars(w.deployment.kgc) if k.endswith("__ssk")]
    ssk = getattr(w.deployment.kgc, ssk_attr[0])
    blob = b"".join(f.payload for f in w.adversary.observed)
    blob += b"".join(s.sk_u.to_bytes() + s.pk_u.to_bytes() for s in w.adversary.captured.values())
    assert cc.scalar_to_bytes(ssk) not in blob


def test_tampering_any_sigma_byte_fails():
    w = World(seed=11)
    run_scenario(w, [{"op": "register", "uav": "A"}, {"op": "auth", "uav": "A"}])
    payload = w.adversary.observed[0].payload
    start = 4 + struct.unpack(">I", payload[:4])[0]
    for i in range(start, len(payload)):
        new = payload[i] ^ 0x01
        assert w.tamper(0, i, new) == "IntegrityFailure", i


def test_tamper_outside_frame_is_script_error():
    w = World(seed=11)
    run_scenario(w, [{"op": "register", "uav": "A"}, {"op": "auth", "uav": "A"}])
    with pytest.raises(ScriptError):
        run_scenario(w, [{"op": "tamper", "frame": 0, "index": 10**6, "byte": "00"}])
    with pytest.raises(ScriptError):
        run_scenario(w, [{"op": "tamper", "frame": 0, "field": "zz", "byte": "00"}])


def test_inject_garbage_and_unknown_identity():
    w = World(seed=5)
    out = run_scenario(w, [
        {"op": "register", "uav": "A"},
        {"op": "inject", "payload": "00"},
        {"op": "inject", "payload": "deadbeef"},
        {"op": "inject", "forge_as": "ghost", "using": None},
    ]).outcomes("inject")
    assert out == ["MalformedFrame", "MalformedFrame", "UnknownUav"]


def test_script_file_round_trip(tmp_path):
    doc = {"name": "from-file", "seed": 4, "config": {"r_l": -1},
           "steps": [{"op": "register", "uav": "A"}, {"op": "auth", "uav": "A", "pwd": "x"},
                     {"op": "auth", "uav": "A", "pwd": "x"}, {"op": "gate", "uav": "A"}]}
    path = tmp_path / "s.json"
    path.write_text(json.dumps(doc))
    scen = load_script(path)
    assert scen == Scenario("from-file", tuple(doc["steps"]), 4, {"r_l": -1})
    assert scen.run().outcomes("gate") == ["reject"]


@pytest.mark.parametrize("doc", [[], {"steps": "nope"}, {"steps": [{"no_op": 1}]},
                                 {"steps": [{"op": "fly"}]}, {"steps": [{"op": "auth"}]},
                                 {"steps": [{"op": "auth", "uav": "missing"}]}])
def test_malformed_scripts_rejected(tmp_path, doc):
    path = tmp_path / "bad.json"
    path.write_text(json.dumps(doc))
    with pytest.raises(ScriptError):
        load_script(path).run()


def test_capture_requires_known_uav():
    with pytest.raises(ScriptError):
        run_scenario(World(seed=1), [{"op": "inject", "forge_as": "B", "using": "A"}])

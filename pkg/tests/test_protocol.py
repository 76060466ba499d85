import random

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from uavzt import crypto_core as cc
from uavzt.ledger import Chain, LedgerRecord, append_block, latest_record, record_reputation
from uavzt.protocol import (
    KGC, BadPassword, Controller, Decision, Denied, Deployment, IntegrityFailure, ProtocolError,
    ReplayedNonce, Session, SigmaCiphertext, SpaPacket, StaleTimestamp, Uav, UavStoredState, UnknownUav,
    decode_auth_request, encode_auth_request, make_id, register, signcrypt, unsigncrypt,
)
from uavzt.puf_sim import PufDevice

G = cc.GENERATOR


def _auth(dep, uav, now, pwd=None):
    pwd = dep.uavs[uav.uav_id][1] if pwd is None else pwd
    pac = uav.build_packet(pwd, 1, "192.168.1.10", 5000, now)
    return pac, uav.signcrypt(pac)


# ------------------------------------------------------------ codecs ----

packets = st.builds(
    SpaPacket,
    nonce=st.binary(min_size=16, max_size=16),
    uav_id=st.binary(min_size=20, max_size=20),
    pwd=st.binary(max_size=64),
    ts=st.integers(0, 2**64 - 1),
    ver=st.integers(0, 255),
    addr1=st.tuples(*[st.integers(0, 255)] * 4).map(lambda t: ".".join(map(str, t))),
    port1=st.integers(0, 65535),
)


@settings(max_examples=200)
@given(packets)
def test_packet_codec_round_trip(pac):
    assert SpaPacket.decode(pac.encode()) == pac


def test_packet_layout_is_length_prefixed():
    pac = SpaPacket(bytes(16), make_id("a"), b"pw", 7, 1, "1.2.3.4", 80)
    enc = pac.encode()
    assert enc[:4] == (16).to_bytes(4, "big")
    assert len(enc) == 7 * 4 + 16 + 20 + 2 + 8 + 1 + 4 + 2
    assert enc.endswith((2).to_bytes(4, "big") + (80).to_bytes(2, "big"))


def test_sigma_wire_layout(deployment):
    uav = deployment.new_uav("A")
    pac, sigma = _auth(deployment, uav, 0)
    wire = sigma.to_bytes()
    n = len(pac.encode())
    assert len(wire) == 4 + n + cc.SIZE_ZP + cc.SIZE_G1 == sigma.wire_size()
    assert wire[:4] == n.to_bytes(4, "big")
    assert SigmaCiphertext.from_bytes(wire) == sigma
    uid, rest = decode_auth_request(encode_auth_request(uav.uav_id, sigma))
    assert uid == uav.uav_id and rest == wire


# ---------------------------------------------------- controller setup ----

def test_controller_keys_satisfy_pairing_identity(rng):
    kgc = KGC.create(chain=Chain(), rng=rng)
    pk_c, sk_c = kgc.register_controller(b"ctl-1")
    assert pk_c == cc.h1(b"ctl-1")
    assert cc.pairing(G, sk_c) == cc.pairing(kgc.spk, pk_c)
    pk_c2, _ = kgc.register_controller(b"ctl-2")
    assert pk_c2 != pk_c
    with pytest.raises(ProtocolError):
        kgc.register_controller(b"ctl-1")


# ------------------------------------------------------- registration ----

def test_registration_gate_thresholds(deployment):
    ctl = deployment.controller
    uav = deployment.new_uav("A")
    chain, uid, pk = deployment.chain, uav.uav_id, uav.keys.pk_u
    rep = 0
    for target in range(-1, ctl.r_l - 2, -1):
        record_reputation(chain, uid, pk, target)
        rep = target
    assert rep == ctl.r_l - 1
    assert ctl.gate_registration(uid) is Decision.REJECT
    for target in range(rep + 1, ctl.r_h + 2):
        record_reputation(chain, uid, pk, target)
    assert ctl.gate_registration(uid) is Decision.SKIP_REGISTRATION
    assert ctl.gate_registration(make_id("new")) is Decision.FORWARD_TO_KGC


@given(st.integers(-50, 50), st.integers(-10, 10), st.integers(1, 10))
def test_gate_partition(rep, r_l, width):
    r_h = r_l + width
    chain = Chain(clock=lambda: 0)
    append_block(chain, [LedgerRecord(b"x" * 20, G, rep)])
    ctl = Controller(None, None, b"c" * 20, G, G, chain, r_l=r_l, r_h=r_h)
    want = Decision.REJECT if rep < r_l else Decision.SKIP_REGISTRATION if rep > r_h else Decision.FORWARD_TO_KGC
    assert ctl.gate_registration(b"x" * 20) is want


def test_registration_keys(deployment):
    uav = deployment.new_uav("A")
    keys = uav.keys
    assert cc.pairing(deployment.kgc.spk, keys.sk_u) == cc.pairing(G, keys.pk_u)
    assert keys.pk_c == deployment.controller.pk_c
    assert latest_record(deployment.chain, uav.uav_id).rep == 0
    assert latest_record(deployment.chain, uav.uav_id).pk_u == keys.pk_u


def test_public_key_binds_puf_response(deployment):
    kgc = deployment.kgc
    uid = make_id("A")
    seen = set()
    for i in range(20):
        kgc.accept_forward(uid, deployment.controller.id_c)
        c = kgc.issue_challenge(uid)
        keys = kgc.register_uav(uid, c, bytes([i]) * 32)
        seen.add(keys.pk_u)
    assert len(seen) == 20


def test_challenges_fresh_and_pending_enforced(deployment):
    kgc, uid = deployment.kgc, make_id("A")
    with pytest.raises(ProtocolError):
        kgc.issue_challenge(uid)
    kgc.accept_forward(uid, deployment.controller.id_c)
    c1 = kgc.issue_challenge(uid)
    c2 = kgc.issue_challenge(uid)
    assert len(c1) == 32 and c1 != c2
    with pytest.raises(ProtocolError):
        kgc.register_uav(uid, c1, bytes(32))  # superseded by c2
    with pytest.raises(ProtocolError):
        kgc.register_uav(make_id("B"), bytes(32), bytes(32))


def test_register_respects_gate(deployment):
    uav = deployment.new_uav("A")
    for r in range(1, 7):
        record_reputation(deployment.chain, uav.uav_id, uav.keys.pk_u, r)
    keys_before = uav.keys
    assert register(uav, deployment.controller, deployment.kgc, b"pw") is Decision.SKIP_REGISTRATION
    assert uav.keys is keys_before


def test_reregistration_keeps_reputation(deployment, clock):
    uav = deployment.new_uav("A")
    deployment.authenticate(uav, clock.now)
    assert register(uav, deployment.controller, deployment.kgc, b"pw") is Decision.FORWARD_TO_KGC
    assert latest_record(deployment.chain, uav.uav_id).rep == 1


# ------------------------------------------------------- signcryption ----

def test_packet_building(deployment):
    uav = deployment.new_uav("A")
    p1 = uav.build_packet(b"pw", 1, "1.1.1.1", 1, 42)
    p2 = uav.build_packet(b"pw", 1, "1.1.1.1", 1, 42)
    assert p1.nonce != p2.nonce and p1.ts == 42
    fresh = Uav(make_id("Z"), PufDevice.manufacture(random.Random(0)), deployment.kgc.params,
                deployment.kgc.spk)
    with pytest.raises(ProtocolError):
        fresh.build_packet(b"pw", 1, "1.1.1.1", 1, 0)


def test_correctness_identities(deployment, rng):
    uav = deployment.new_uav("A")
    st_ = uav.stored_state()
    spk, ctl = deployment.kgc.spk, deployment.controller
    for _ in range(5):
        h, v = cc.random_scalar(rng), cc.random_scalar(rng)
        w = cc.scalar_mul((h - v) % cc.GROUP_ORDER, st_.sk_u)
        lhs1 = cc.g2_mul(cc.pairing(spk, w), cc.g2_exp(cc.pairing(G, st_.pk_u), v))
        assert lhs1 == cc.g2_exp(cc.pairing(G, st_.pk_u), h)
        lhs2 = cc.g2_mul(cc.pairing(w, ctl._sk_c), cc.g2_exp(cc.pairing(st_.pk_u, st_.pk_c), v))
        assert lhs2 == cc.g2_exp(cc.pairing(st_.pk_u, st_.pk_c), h)


def test_literal_r1_definition_would_not_verify(deployment, rng):
    """r1 = e(spk, PK_U)^h does not match what the verifier recomputes."""
    uav = deployment.new_uav("A")
    st_ = uav.stored_state()
    h = cc.random_scalar(rng)
    literal = cc.g2_exp(cc.pairing(deployment.kgc.spk, st_.pk_u), h)
    v = cc.h3(b"E", literal)
    w = cc.scalar_mul((h - v) % cc.GROUP_ORDER, st_.sk_u)
    recomputed = cc.g2_mul(cc.pairing(deployment.kgc.spk, w), cc.g2_exp(cc.pairing(G, st_.pk_u), v))
    assert recomputed != literal


def test_round_trip_many_packets(deployment, rng):
    uav = deployment.new_uav("A")
    ctl = deployment.controller
    st_ = uav.stored_state()
    for i in range(30):
        pac = SpaPacket(rng.randbytes(16), uav.uav_id, rng.randbytes(rng.randrange(0, 40)), rng.getrandbits(63),
                        rng.randrange(256), "10.1.2.3", rng.randrange(65536))
        sigma, r2 = signcrypt(st_, pac, rng)
        plain, r2_ctl = unsigncrypt(deployment.kgc.spk, ctl.pk_c, ctl._sk_c, st_.pk_u, sigma)
        assert SpaPacket.decode(plain) == pac and r2 == r2_ctl


def test_signcryption_is_randomized(deployment):
    uav = deployment.new_uav("A")
    pac = uav.build_packet(b"pw", 1, "1.1.1.1", 1, 0)
    assert uav.signcrypt(pac) != uav.signcrypt(pac)


def test_identity_w_still_verifies(deployment):
    # h == v makes W the identity; the verifier equation must still hold
    st_ = deployment.new_uav("A").stored_state()
    h = 12345
    r1 = cc.g2_exp(cc.pairing(G, st_.pk_u), h)
    sigma = SigmaCiphertext(b"", h, cc.g1_identity())
    recomputed = cc.g2_mul(cc.pairing(deployment.kgc.spk, sigma.w), cc.g2_exp(cc.pairing(G, st_.pk_u), sigma.v))
    assert recomputed == r1
    assert SigmaCiphertext.from_bytes(sigma.to_bytes()).w.is_identity


def test_unsigncrypt_op_counts(deployment):
    uav = deployment.new_uav("A")
    _, sigma = _auth(deployment, uav, 0)
    wire = sigma.to_bytes()
    with cc.count_ops() as ops:
        deployment.controller.unsigncrypt(uav.uav_id, wire)
    assert (ops.n_pairing, ops.n_exp_g2, ops.n_hash, ops.n_mul_g1) == (4, 2, 2, 0)


def test_signcrypt_op_counts(deployment):
    uav = deployment.new_uav("A")
    pac = uav.build_packet(b"pw", 1, "1.1.1.1", 1, 0)
    with cc.count_ops() as ops:
        uav.signcrypt(pac)
    assert (ops.n_pairing, ops.n_exp_g2, ops.n_hash, ops.n_mul_g1) == (2, 2, 2, 1)


# ------------------------------------------------------- verification ----

def test_unknown_uav(deployment):
    uav = deployment.new_uav("A")
    _, sigma = _auth(deployment, uav, 0)
    with pytest.raises(UnknownUav):
        deployment.controller.unsigncrypt(make_id("ghost"), sigma)


def test_tampered_sigma_rejected_and_penalized(deployment, rng):
    uav = deployment.new_uav("A")
    _, sigma = _auth(deployment, uav, 0)
    wire = sigma.to_bytes()
    for k in range(30):
        data = bytearray(wire)
        i = rng.randrange(len(data))
        data[i] ^= rng.randrange(1, 256)
        with pytest.raises(IntegrityFailure):
            deployment.controller.unsigncrypt(uav.uav_id, bytes(data))
        assert latest_record(deployment.chain, uav.uav_id).rep == -(k + 1)


def test_cross_key_forgery_rejected(deployment, rng):
    a = deployment.new_uav("A")
    b = deployment.new_uav("B")
    sa = a.stored_state()
    pac = SpaPacket(rng.randbytes(16), b.uav_id, b"pw", 0, 1, "1.1.1.1", 1)
    forged = UavStoredState(b.uav_id, b.keys.pk_u, sa.sk_u, sa.pk_c)
    sigma, _ = signcrypt(forged, pac, rng)
    with pytest.raises(IntegrityFailure):
        deployment.controller.unsigncrypt(b.uav_id, sigma)
    # A's own valid sigma presented under B's identity
    pac_a, sigma_a = _auth(deployment, a, 0)
    with pytest.raises(IntegrityFailure):
        deployment.controller.unsigncrypt(b.uav_id, sigma_a)


def test_identity_mismatch_inside_packet(deployment, rng):
    a = deployment.new_uav("A")
    pac = SpaPacket(rng.randbytes(16), make_id("B"), b"pw", 0, 1, "1.1.1.1", 1)
    sigma, _ = signcrypt(a.stored_state(), pac, rng)
    with pytest.raises(IntegrityFailure, match="identity"):
        deployment.controller.unsigncrypt(a.uav_id, sigma)


# -------------------------------------------------------- policy check ----

def test_replay_rejected(deployment, clock):
    uav = deployment.new_uav("A")
    ctl = deployment.controller
    pac, sigma = _auth(deployment, uav, clock.now)
    ctl.authenticate(uav.uav_id, sigma, clock.now, "10.0.0.2", 443)
    clock.advance(5)
    got = ctl.unsigncrypt(uav.uav_id, sigma)
    with pytest.raises(ReplayedNonce):
        ctl.policy_check(got, clock.now)
    assert latest_record(deployment.chain, uav.uav_id).rep == 0  # +1 then -1


def test_stale_timestamp(deployment, clock):
    uav = deployment.new_uav("A")
    ctl = deployment.controller
    pac, sigma = _auth(deployment, uav, clock.now - ctl.ts_window - 1)
    got = ctl.unsigncrypt(uav.uav_id, sigma)
    with pytest.raises(StaleTimestamp):
        ctl.policy_check(got, clock.now)
    pac, sigma = _auth(deployment, uav, clock.now - ctl.ts_window)
    ctl.policy_check(ctl.unsigncrypt(uav.uav_id, sigma), clock.now)


def test_bad_password_costs_reputation(deployment, clock):
    uav = deployment.new_uav("A", pwd=b"right")
    _, sigma = _auth(deployment, uav, clock.now, pwd=b"wrong")
    with pytest.raises(BadPassword):
        deployment.controller.authenticate(uav.uav_id, sigma, clock.now, "10.0.0.2", 443)
    assert latest_record(deployment.chain, uav.uav_id).rep == -1


def test_nonce_cache_evicts_old_entries(deployment, clock):
    uav = deployment.new_uav("A")
    ctl = deployment.controller
    for _ in range(3):
        deployment.authenticate(uav, clock.now)
        clock.advance(1)
    assert len(ctl.nonce_cache) == 3
    clock.advance(ctl.ts_window + 10)
    deployment.authenticate(uav, clock.now)
    assert len(ctl.nonce_cache) == 1


def test_policy_check_requires_verified_packet(deployment):
    uav = deployment.new_uav("A")
    pac = uav.build_packet(b"pw", 1, "1.1.1.1", 1, 0)
    with pytest.raises(ProtocolError):
        deployment.controller.policy_check(pac, 0)


# --------------------------------------------------------------- grant ----

def test_grant_delivers_gateway_coordinates(deployment, clock):
    uav = deployment.new_uav("A")
    grant = deployment.authenticate(uav, clock.now, addr2="172.16.0.9", port2=8443)
    assert uav.open_grant(grant.m) == ("172.16.0.9", 8443, uav.uav_id)
    assert latest_record(deployment.chain, uav.uav_id).rep == 1


def test_grant_ordering_enforced(deployment, clock):
    uav = deployment.new_uav("A")
    ctl = deployment.controller
    with pytest.raises(ProtocolError):
        ctl.grant(uav.uav_id, "10.0.0.2", 443, clock.now)
    _, sigma = _auth(deployment, uav, clock.now)
    ctl.unsigncrypt(uav.uav_id, sigma)
    with pytest.raises(ProtocolError):
        ctl.grant(uav.uav_id, "10.0.0.2", 443, clock.now)


def test_gateway_default_deny_and_expiry(deployment, clock):
    uav = deployment.new_uav("A")
    gw = deployment.gateway
    assert isinstance(gw.connect(uav.uav_id, "10.0.0.2", 443, clock.now), Denied)
    grant = deployment.authenticate(uav, clock.now)
    sess = gw.connect(uav.uav_id, "10.0.0.2", 443, clock.now + 10)
    assert isinstance(sess, Session) and sess.uav_id == uav.uav_id
    assert isinstance(gw.connect(uav.uav_id, "10.0.0.2", 444, clock.now), Denied)
    assert isinstance(gw.connect(make_id("B"), "10.0.0.2", 443, clock.now), Denied)
    assert isinstance(gw.connect(uav.uav_id, "10.0.0.2", 443, grant.expiry + 1), Denied)
    second = gw.connect(uav.uav_id, "10.0.0.2", 443, clock.now + 20)
    assert second.session_id != sess.session_id


# ------------------------------------------------------- bookkeeping ----

@settings(max_examples=12, deadline=None)
@given(st.lists(st.booleans(), min_size=1, max_size=8))
def test_reputation_equals_successes_minus_failures(outcomes):
    t = [1_700_000_000_000]
    dep = Deployment.create(seed=len(outcomes), clock=lambda: t[0])
    uav = dep.new_uav("A", pwd=b"pw")
    for ok in outcomes:
        pac = uav.build_packet(b"pw" if ok else b"bad", 1, "1.1.1.1", 1, t[0])
        try:
            dep.controller.authenticate(uav.uav_id, uav.signcrypt(pac), t[0], "10.0.0.2", 443)
        except BadPassword:
            pass
        t[0] += 1
    s = sum(outcomes)
    assert latest_record(dep.chain, uav.uav_id).rep == s - (len(outcomes) - s)


def test_controller_threshold_validation(deployment):
    c = deployment.controller
    with pytest.raises(ValueError):
        Controller(c.params, c.spk, c.id_c, c.pk_c, c._sk_c, c.chain, r_l=5, r_h=5)


def test_storage_footprint(deployment):
    st_ = deployment.new_uav("A").stored_state()
    assert st_.storage_bytes() == 20 + 3 * cc.SIZE_G1

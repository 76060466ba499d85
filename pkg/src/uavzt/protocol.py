"""Actors and message flows: KGC, UAV, SDP controller and SDP gateway.

Signcryption of an SPA packet ``pac`` by a UAV holding ``(PK_U, SK_U)``::

    r1 = e(G, PK_U)^h
    r2 = H2(e(PK_U, PK_C)^h)
    E  = Enc_r2(pac),  v = H3(E, r1),  W = (h - v) SK_U

and the controller recovers ``r1 = e(spk, W) e(G, PK_U)^v`` and
``r2 = H2(e(W, SK_C) e(PK_U, PK_C)^v)`` using ``SK_U = ssk^-1 PK_U`` and
``SK_C = ssk PK_C``.  The packet is accepted iff ``v == H3(E, r1)``.
"""

from __future__ import annotations

import enum
import hashlib
import hmac
import ipaddress
import random
import secrets
import struct
from dataclasses import dataclass, field

from . import crypto_core as cc
from .crypto_core import EncodingError, G1Elem
from .ledger import Chain, latest_record, record_registration, record_reputation
from .puf_sim import CHALLENGE_BYTES, PufDevice

ID_SIZE = 20
NONCE_BYTES = 16
PWD_ITERATIONS = 1000
GRANT_NONCE = 1  # keystream nonce for the controller -> UAV direction under r2

DEFAULT_R_LOW = -3
DEFAULT_R_HIGH = 5
DEFAULT_TS_WINDOW_MS = 30_000
DEFAULT_GRANT_TTL_MS = 60_000


class ProtocolError(Exception):
    """A message arrived in a state that does not allow it."""


class AuthFailure(Exception):
    pass


class UnknownUav(AuthFailure):
    pass


class IntegrityFailure(AuthFailure):
    pass


class PolicyFailure(Exception):
    pass


class BadPassword(PolicyFailure):
    pass


class StaleTimestamp(PolicyFailure):
    pass


class ReplayedNonce(PolicyFailure):
    pass


class Decision(enum.Enum):
    REJECT = "reject"
    SKIP_REGISTRATION = "skip_registration"
    FORWARD_TO_KGC = "forward_to_kgc"


def make_id(name) -> bytes:
    """Fixed-width identity: ``name`` right-padded with zero bytes."""
    raw = name.encode() if isinstance(name, str) else bytes(name)
    if not raw or len(raw) > ID_SIZE:
        raise ValueError(f"identity must be 1..{ID_SIZE} bytes")
    return raw.ljust(ID_SIZE, b"\0")


def _lp(b: bytes) -> bytes:
    return struct.pack(">I", len(b)) + b


def _split_lp(data: bytes, count: int) -> list:
    out, pos = [], 0
    for _ in range(count):
        if pos + 4 > len(data):
            raise EncodingError("truncated field length")
        (n,) = struct.unpack(">I", data[pos:pos + 4])
        pos += 4
        if pos + n > len(data):
            raise EncodingError("truncated field")
        out.append(data[pos:pos + n])
        pos += n
    if pos != len(data):
        raise EncodingError("trailing bytes")
    return out


# ------------------------------------------------------------ wire types ----

@dataclass(frozen=True)
class SpaPacket:
    nonce: bytes
    uav_id: bytes
    pwd: bytes
    ts: int
    ver: int
    addr1: str
    port1: int

    def encode(self) -> bytes:
        return b"".join(map(_lp, (
            self.nonce,
            self.uav_id,
            self.pwd,
            struct.pack(">Q", self.ts),
            struct.pack(">B", self.ver),
            ipaddress.IPv4Address(self.addr1).packed,
            struct.pack(">H", self.port1),
        )))

    @classmethod
    def decode(cls, data: bytes) -> SpaPacket:
        n, uid, pwd, ts, ver, addr, port = _split_lp(data, 7)
        if len(n) != NONCE_BYTES or len(uid) != ID_SIZE or len(ts) != 8 or len(ver) != 1 \
                or len(addr) != 4 or len(port) != 2:
            raise EncodingError("SPA field has the wrong width")
        return cls(n, uid, pwd, struct.unpack(">Q", ts)[0], ver[0],
                   str(ipaddress.IPv4Address(addr)), struct.unpack(">H", port)[0])


@dataclass(frozen=True)
class SigmaCiphertext:
    e_pac: bytes
    v: int
    w: G1Elem

    def to_bytes(self) -> bytes:
        return _lp(self.e_pac) + cc.scalar_to_bytes(self.v) + self.w.to_bytes()

    @classmethod
    def from_bytes(cls, data: bytes) -> SigmaCiphertext:
        if len(data) < 4:
            raise EncodingError("truncated ciphertext")
        (n,) = struct.unpack(">I", data[:4])
        if len(data) != 4 + n + cc.SIZE_ZP + cc.SIZE_G1:
            raise EncodingError("ciphertext length mismatch")
        v = cc.scalar_from_bytes(data[4 + n:4 + n + cc.SIZE_ZP])
        return cls(data[4:4 + n], v, G1Elem.from_bytes(data[4 + n + cc.SIZE_ZP:]))

    def wire_size(self) -> int:
        return 4 + len(self.e_pac) + cc.SIZE_ZP + cc.SIZE_G1


def encode_auth_request(uav_id: bytes, sigma: SigmaCiphertext) -> bytes:
    """Frame sent UAV -> controller: the identity travels in clear ahead of sigma."""
    return _lp(uav_id) + sigma.to_bytes()


def decode_auth_request(frame: bytes):
    """Returns ``(uav_id, sigma_bytes)``; sigma is decoded later by the controller."""
    if len(frame) < 4:
        raise EncodingError("truncated frame")
    (n,) = struct.unpack(">I", frame[:4])
    if 4 + n > len(frame):
        raise EncodingError("truncated identity")
    return frame[4:4 + n], frame[4 + n:]


@dataclass(frozen=True)
class UavKeys:
    pk_u: G1Elem
    sk_u: G1Elem
    pk_c: G1Elem


@dataclass(frozen=True)
class UavStoredState:
    """Everything a UAV keeps in memory after registration."""
    uav_id: bytes
    pk_u: G1Elem
    sk_u: G1Elem
    pk_c: G1Elem

    def storage_bytes(self) -> int:
        return len(self.uav_id) + 3 * cc.SIZE_G1


@dataclass(frozen=True)
class PolicyGrant:
    m: bytes
    uav_id: bytes
    addr2: str
    port2: int
    expiry: int


@dataclass(frozen=True)
class Session:
    session_id: str
    uav_id: bytes
    addr2: str
    port2: int


@dataclass(frozen=True)
class Denied:
    reason: str


def _grant_plaintext(addr2: str, port2: int, uav_id: bytes) -> bytes:
    return ipaddress.IPv4Address(addr2).packed + struct.pack(">H", port2) + uav_id


def open_grant(session_key: bytes, m: bytes):
    """UAV side: ``m`` -> ``(addr2, port2, uav_id)``."""
    pt = cc.sym_decrypt(session_key, m, nonce=GRANT_NONCE)
    if len(pt) < 6:
        raise EncodingError("grant too short")
    return str(ipaddress.IPv4Address(pt[:4])), struct.unpack(">H", pt[4:6])[0], pt[6:]


# ----------------------------------------------------------- signcryption ----

def signcrypt(state: UavStoredState, pac: SpaPacket, rng=None, g: G1Elem = cc.GENERATOR):
    """Return ``(sigma, r2)``.

    Costs 2 pairings, 2 G2 exponentiations, 2 hash calls and one G1
    multiplication.  ``h == v`` is allowed (W is then the identity).
    """
    h = cc.random_scalar(rng)
    r1 = cc.g2_exp(cc.pairing(g, state.pk_u), h)
    r2 = cc.h2(cc.g2_exp(cc.pairing(state.pk_u, state.pk_c), h))
    e_pac = cc.sym_encrypt(r2, pac.encode())
    v = cc.h3(e_pac, r1)
    w = cc.scalar_mul((h - v) % cc.GROUP_ORDER, state.sk_u)
    return SigmaCiphertext(e_pac, v, w), r2


def unsigncrypt(spk: G1Elem, pk_c: G1Elem, sk_c: G1Elem, pk_u: G1Elem, sigma: SigmaCiphertext,
                g: G1Elem = cc.GENERATOR):
    """Return ``(plaintext, r2)`` or raise :class:`IntegrityFailure`.

    Costs exactly 4 pairings, 2 G2 exponentiations, 2 G2 multiplications and
    2 hash calls.
    """
    r1 = cc.g2_mul(cc.pairing(spk, sigma.w), cc.g2_exp(cc.pairing(g, pk_u), sigma.v))
    r2 = cc.h2(cc.g2_mul(cc.pairing(sigma.w, sk_c), cc.g2_exp(cc.pairing(pk_u, pk_c), sigma.v)))
    plain = cc.sym_decrypt(r2, sigma.e_pac)
    if cc.h3(sigma.e_pac, r1) != sigma.v:
        raise IntegrityFailure("v does not match H3(E_pac, r1')")
    return plain, r2


# ------------------------------------------------------------------ actors ----

class KGC:
    """Key generation center; the only holder of the master secret."""

    def __init__(self, params: cc.SystemParams, spk: G1Elem, ssk: int, chain: Chain, rng=None):
        self.params = params
        self.spk = spk
        self.__ssk = ssk
        self.chain = chain
        self.rng = rng or secrets.SystemRandom()
        self.controllers: dict = {}
        self._forwarded: dict = {}
        self._pending: dict = {}

    @classmethod
    def create(cls, chain: Chain, k: int = 160, l: int = 256, rng=None) -> KGC:
        params, spk, ssk = cc.setup(k, l, rng)
        return cls(params, spk, ssk, chain, rng)

    def register_controller(self, id_c: bytes):
        if id_c in self.controllers:
            raise ProtocolError(f"controller {id_c!r} already registered")
        pk_c = cc.h1(id_c)
        sk_c = cc.scalar_mul(self.__ssk, pk_c)
        self.controllers[id_c] = pk_c
        return pk_c, sk_c

    def accept_forward(self, uav_id: bytes, id_c: bytes) -> None:
        if id_c not in self.controllers:
            raise ProtocolError("forward from an unregistered controller")
        self._forwarded[uav_id] = id_c

    def issue_challenge(self, uav_id: bytes) -> bytes:
        if uav_id not in self._forwarded:
            raise ProtocolError("no pending registration for this UAV")
        c_i = self.rng.randbytes(CHALLENGE_BYTES)
        self._pending[uav_id] = c_i
        return c_i

    def register_uav(self, uav_id: bytes, c_i: bytes, r_i: bytes) -> UavKeys:
        if self._pending.get(uav_id) != c_i:
            raise ProtocolError("stale or unknown challenge")
        del self._pending[uav_id]
        id_c = self._forwarded.pop(uav_id)
        pk_u = cc.h1(uav_id + r_i)
        sk_u = cc.scalar_mul(pow(self.__ssk, -1, cc.GROUP_ORDER), pk_u)
        record_registration(self.chain, uav_id, pk_u)
        return UavKeys(pk_u, sk_u, self.controllers[id_c])


class Uav:
    def __init__(self, uav_id: bytes, puf: PufDevice, params: cc.SystemParams, spk: G1Elem, rng=None):
        self.uav_id = uav_id
        self.puf = puf
        self.params = params
        self.spk = spk
        self.rng = rng or secrets.SystemRandom()
        self.keys: UavKeys | None = None
        self.session_key: bytes | None = None

    @property
    def registered(self) -> bool:
        return self.keys is not None

    def respond(self, challenge: bytes) -> bytes:
        return self.puf.evaluate(challenge)

    def install_keys(self, keys: UavKeys) -> None:
        self.keys = keys

    def stored_state(self) -> UavStoredState:
        if self.keys is None:
            raise ProtocolError("UAV is not registered")
        return UavStoredState(self.uav_id, self.keys.pk_u, self.keys.sk_u, self.keys.pk_c)

    def build_packet(self, pwd: bytes, ver: int, addr1: str, port1: int, now: int) -> SpaPacket:
        if self.keys is None:
            raise ProtocolError("UAV is not registered")
        return SpaPacket(self.rng.randbytes(NONCE_BYTES), self.uav_id, pwd, now, ver, addr1, port1)

    def signcrypt(self, pac: SpaPacket) -> SigmaCiphertext:
        sigma, self.session_key = signcrypt(self.stored_state(), pac, self.rng)
        return sigma

    def open_grant(self, m: bytes):
        if self.session_key is None:
            raise ProtocolError("no session key")
        return open_grant(self.session_key, m)


class Gateway:
    """Default-deny gateway; admits only controller-issued, unexpired policies."""

    def __init__(self, rng=None):
        self.rng = rng or secrets.SystemRandom()
        self.policies: dict = {}

    def install_policy(self, uav_id: bytes, addr2: str, port2: int, expiry: int) -> None:
        self.policies[(uav_id, addr2, port2)] = expiry

    def connect(self, uav_id: bytes, addr2: str, port2: int, now: int):
        expiry = self.policies.get((uav_id, addr2, port2))
        if expiry is None:
            return Denied("no policy")
        if now > expiry:
            return Denied("policy expired")
        return Session(self.rng.randbytes(16).hex(), uav_id, addr2, port2)


@dataclass
class _Pending:
    pac: SpaPacket
    session_key: bytes
    policy_ok: bool = False


class Controller:
    """SDP controller: registration gate, sigma verification, policy checks, grants."""

    def __init__(self, params: cc.SystemParams, spk: G1Elem, id_c: bytes, pk_c: G1Elem, sk_c: G1Elem,
                 chain: Chain, gateway: Gateway | None = None, r_l: int = DEFAULT_R_LOW,
                 r_h: int = DEFAULT_R_HIGH, ts_window: int = DEFAULT_TS_WINDOW_MS,
                 grant_ttl: int = DEFAULT_GRANT_TTL_MS, rng=None):
        if not r_l < r_h:
            raise ValueError("r_l must be below r_h")
        self.params = params
        self.spk = spk
        self.id_c = id_c
        self.pk_c = pk_c
        self._sk_c = sk_c
        self.chain = chain
        self.gateway = gateway
        self.r_l = r_l
        self.r_h = r_h
        self.ts_window = ts_window
        self.grant_ttl = grant_ttl
        self.rng = rng or secrets.SystemRandom()
        self.password_table: dict = {}
        self.nonce_cache: dict = {}
        self._pending: dict = {}

    # -- registration ------------------------------------------------------

    def set_password(self, uav_id: bytes, pwd: bytes) -> None:
        salt = self.rng.randbytes(16)
        self.password_table[uav_id] = (salt, hashlib.pbkdf2_hmac("sha256", pwd, salt, PWD_ITERATIONS))

    def gate_registration(self, uav_id: bytes) -> Decision:
        rec = latest_record(self.chain, uav_id)
        rep = 0 if rec is None else rec.rep
        if rep < self.r_l:
            return Decision.REJECT
        if rep > self.r_h:
            return Decision.SKIP_REGISTRATION
        return Decision.FORWARD_TO_KGC

    # -- reputation --------------------------------------------------------

    def _adjust(self, uav_id: bytes, delta: int) -> None:
        rec = latest_record(self.chain, uav_id)
        if rec is not None:
            record_reputation(self.chain, uav_id, rec.pk_u, rec.rep + delta)

    # -- authentication ----------------------------------------------------

    def unsigncrypt(self, uav_id: bytes, sigma) -> SpaPacket:
        rec = latest_record(self.chain, uav_id)
        if rec is None:
            raise UnknownUav(f"no ledger record for {uav_id!r}")
        self._pending.pop(uav_id, None)
        try:
            if not isinstance(sigma, SigmaCiphertext):
                sigma = SigmaCiphertext.from_bytes(sigma)
            plain, r2 = unsigncrypt(self.spk, self.pk_c, self._sk_c, rec.pk_u, sigma)
            pac = SpaPacket.decode(plain)
            if pac.uav_id != uav_id:
                raise IntegrityFailure("packet identity differs from the claimed identity")
        except (EncodingError, IntegrityFailure) as exc:
            self._adjust(uav_id, -1)
            if isinstance(exc, IntegrityFailure):
                raise
            raise IntegrityFailure(f"malformed ciphertext: {exc}") from None
        self._pending[uav_id] = _Pending(pac, r2)
        return pac

    def _evict(self, now: int) -> None:
        for key in [k for k, ts in self.nonce_cache.items() if now - ts > self.ts_window]:
            del self.nonce_cache[key]

    def policy_check(self, pac: SpaPacket, now: int) -> None:
        pending = self._pending.get(pac.uav_id)
        if pending is None or pending.pac != pac:
            raise ProtocolError("policy check without a verified packet")
        try:
            salt, digest = self.password_table.get(pac.uav_id, (b"", b""))
            if not hmac.compare_digest(hashlib.pbkdf2_hmac("sha256", pac.pwd, salt, PWD_ITERATIONS), digest):
                raise BadPassword("password mismatch")
            if abs(now - pac.ts) > self.ts_window:
                raise StaleTimestamp(f"timestamp {pac.ts} outside window at {now}")
            self._evict(now)
            if (pac.nonce, pac.ts) in self.nonce_cache:
                raise ReplayedNonce("nonce already seen")
        except PolicyFailure:
            del self._pending[pac.uav_id]
            self._adjust(pac.uav_id, -1)
            raise
        self.nonce_cache[(pac.nonce, pac.ts)] = pac.ts
        pending.policy_ok = True

    def grant(self, uav_id: bytes, addr2: str, port2: int, now: int) -> PolicyGrant:
        pending = self._pending.get(uav_id)
        if pending is None or not pending.policy_ok:
            raise ProtocolError("grant requires a passed policy check")
        del self._pending[uav_id]
        m = cc.sym_encrypt(pending.session_key, _grant_plaintext(addr2, port2, uav_id), nonce=GRANT_NONCE)
        self._adjust(uav_id, +1)
        expiry = now + self.grant_ttl
        if self.gateway is not None:
            self.gateway.install_policy(uav_id, addr2, port2, expiry)
        return PolicyGrant(m, uav_id, addr2, port2, expiry)

    def authenticate(self, uav_id: bytes, sigma, now: int, addr2: str, port2: int) -> PolicyGrant:
        """Verify, check policy and grant in one call; failures raise."""
        pac = self.unsigncrypt(uav_id, sigma)
        self.policy_check(pac, now)
        return self.grant(uav_id, addr2, port2, now)


# ------------------------------------------------------------ orchestration ----

def register(uav: Uav, controller: Controller, kgc: KGC, pwd: bytes) -> Decision:
    """Run the registration phase for one UAV; keys are installed on success."""
    decision = controller.gate_registration(uav.uav_id)
    if decision is not Decision.FORWARD_TO_KGC:
        return decision
    kgc.accept_forward(uav.uav_id, controller.id_c)
    c_i = kgc.issue_challenge(uav.uav_id)
    keys = kgc.register_uav(uav.uav_id, c_i, uav.respond(c_i))
    uav.install_keys(keys)
    controller.set_password(uav.uav_id, pwd)
    return decision


@dataclass
class Deployment:
    """A ready-to-use single-controller system sharing one chain and clock."""
    kgc: KGC
    controller: Controller
    gateway: Gateway
    chain: Chain
    rng: random.Random
    uavs: dict = field(default_factory=dict)

    @classmethod
    def create(cls, seed: int | None = None, clock=None, id_c: bytes = b"sdp-controller", **controller_kw) -> Deployment:
        rng = random.Random(seed) if seed is not None else secrets.SystemRandom()
        chain = Chain(clock=clock)
        kgc = KGC.create(chain, rng=rng)
        pk_c, sk_c = kgc.register_controller(make_id(id_c))
        gateway = Gateway(rng)
        controller = Controller(kgc.params, kgc.spk, make_id(id_c), pk_c, sk_c, chain, gateway, rng=rng,
                                **controller_kw)
        return cls(kgc, controller, gateway, chain, rng)

    def new_uav(self, name, pwd: bytes = b"pw", noise_rate: float = 0.0) -> Uav:
        uav = Uav(make_id(name), PufDevice.manufacture(self.rng, noise_rate), self.kgc.params, self.kgc.spk, self.rng)
        self.uavs[uav.uav_id] = (uav, pwd)
        register(uav, self.controller, self.kgc, pwd)
        return uav

    def authenticate(self, uav: Uav, now: int, addr2: str = "10.0.0.2", port2: int = 443) -> PolicyGrant:
        pwd = self.uavs[uav.uav_id][1]
        pac = uav.build_packet(pwd, 1, "192.168.1.10", 5000, now)
        return self.controller.authenticate(uav.uav_id, uav.signcrypt(pac), now, addr2, port2)

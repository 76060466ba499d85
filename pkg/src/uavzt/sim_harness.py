"""Deterministic in-memory network with a scripted Dolev-Yao adversary.

A script is a list of steps (plain dicts, JSON friendly).  Honest steps drive
the actors; adversary steps act only on what the adversary legitimately has:
frames seen on open channels and the stored state of captured UAVs.

Honest steps::

    {"op": "register", "uav": "A"}                  # over the secure channel
    {"op": "auth", "uav": "A", "pwd": "..", "ts_offset": -31000}
    {"op": "gate", "uav": "A"}
    {"op": "connect", "uav": "A"}
    {"op": "advance", "ms": 1000}

Adversary steps::

    {"op": "eavesdrop"}
    {"op": "replay", "frame": -2}
    {"op": "tamper", "frame": 0, "index": 40, "byte": "ff"}
    {"op": "tamper", "frame": 0, "field": "w", "offset": 3, "byte": "00"}
    {"op": "inject", "receiver": "controller", "payload": "<hex>"}
    {"op": "inject", "forge_as": "B", "using": "A"}       # using may be null
    {"op": "capture", "uav": "A"}

``frame`` indexes the adversary's observation log (negative counts from the
end).
"""

from __future__ import annotations

import enum
import json
import struct
from dataclasses import asdict, dataclass, field

from . import crypto_core as cc
from .crypto_core import EncodingError
from .ledger import latest_record
from .protocol import (
    AuthFailure, Decision, Denied, Deployment, PolicyFailure, ProtocolError, Session, SpaPacket, Uav,
    UavStoredState, decode_auth_request, encode_auth_request, make_id, signcrypt,
)
from .puf_sim import PufDevice

GATEWAY_ADDR = "10.0.0.2"
GATEWAY_PORT = 443


class ScriptError(ValueError):
    pass


class ChannelKind(enum.Enum):
    SECURE = "secure"
    OPEN = "open"


@dataclass(frozen=True)
class Frame:
    sender: str
    receiver: str
    channel: str
    label: str
    payload: bytes

    def as_dict(self) -> dict:
        d = asdict(self)
        d["payload"] = self.payload.hex()
        return d


class Channel:
    def __init__(self, kind: ChannelKind):
        self.kind = kind
        self.delivered: list = []
        self.taps: list = []

    def send(self, frame: Frame) -> Frame:
        self.delivered.append(frame)
        if self.kind is ChannelKind.OPEN:
            for tap in self.taps:
                tap(frame)
        return frame


class Adversary:
    """Holds only open-channel observations and captured UAV memories."""

    def __init__(self):
        self.observed: list = []
        self.captured: dict = {}

    def observe(self, frame: Frame) -> None:
        self.observed.append(frame)

    def frame(self, ref: int) -> Frame:
        try:
            return self.observed[ref]
        except (IndexError, TypeError):
            raise ScriptError(f"no observed frame {ref!r}") from None


@dataclass
class ScenarioReport:
    name: str
    seed: int
    events: list = field(default_factory=list)
    reputations: dict = field(default_factory=dict)
    chain: dict = field(default_factory=dict)
    observed_frames: int = 0

    def outcomes(self, op: str | None = None) -> list:
        return [e["outcome"] for e in self.events if op is None or e["op"] == op]

    def to_json(self) -> str:
        return json.dumps(asdict(self), sort_keys=True, indent=1)


class World:
    """Actors, channels, logical clock and the adversary."""

    def __init__(self, seed: int = 0, start_ms: int = 1_700_000_000_000, **controller_kw):
        self.now = start_ms
        self.seed = seed
        self.deployment = Deployment.create(seed=seed, clock=lambda: self.now, **controller_kw)
        self.rng = self.deployment.rng
        self.secure = Channel(ChannelKind.SECURE)
        self.open = Channel(ChannelKind.OPEN)
        self.adversary = Adversary()
        self.open.taps.append(self.adversary.observe)
        self.uavs: dict = {}
        self.grants: dict = {}

    @property
    def controller(self):
        return self.deployment.controller

    @property
    def chain(self):
        return self.deployment.chain

    def rep(self, name) -> int | None:
        rec = latest_record(self.chain, make_id(name))
        return None if rec is None else rec.rep

    # -- honest actors -------------------------------------------------------

    def _uav(self, name):
        if name not in self.uavs:
            raise ScriptError(f"unknown UAV {name!r}")
        return self.uavs[name]

    def register(self, name: str, pwd: bytes = b"pw") -> str:
        d = self.deployment
        if name not in self.uavs:
            self.uavs[name] = (Uav(make_id(name), PufDevice.manufacture(self.rng), d.kgc.params, d.kgc.spk,
                                   self.rng), pwd)
        uav, pwd = self.uavs[name]
        uid = uav.uav_id
        self.secure.send(Frame(name, "controller", "secure", "register_request", uid))
        decision = self.controller.gate_registration(uid)
        if decision is not Decision.FORWARD_TO_KGC:
            self.secure.send(Frame("controller", name, "secure", "register_decision", decision.value.encode()))
            return decision.value
        self.secure.send(Frame("controller", "kgc", "secure", "register_forward", uid))
        d.kgc.accept_forward(uid, self.controller.id_c)
        c_i = d.kgc.issue_challenge(uid)
        self.secure.send(Frame("kgc", name, "secure", "challenge", c_i))
        r_i = uav.respond(c_i)
        self.secure.send(Frame(name, "kgc", "secure", "response", c_i + r_i))
        keys = d.kgc.register_uav(uid, c_i, r_i)
        self.secure.send(Frame("kgc", name, "secure", "keys",
                               keys.pk_u.to_bytes() + keys.sk_u.to_bytes() + keys.pk_c.to_bytes()))
        uav.install_keys(keys)
        self.controller.set_password(uid, pwd)
        return decision.value

    def auth(self, name: str, pwd: bytes | None = None, ts_offset: int = 0) -> str:
        uav, good_pwd = self._uav(name)
        if not uav.registered:
            raise ScriptError(f"UAV {name!r} is not registered")
        pac = uav.build_packet(good_pwd if pwd is None else pwd, 1, "192.168.1.10", 5000, self.now + ts_offset)
        sigma = uav.signcrypt(pac)
        frame = self.open.send(Frame(name, "controller", "open", "auth_request",
                                     encode_auth_request(uav.uav_id, sigma)))
        return self.deliver(frame)

    def deliver(self, frame: Frame) -> str:
        """Hand a frame to its receiver and return the outcome label."""
        if frame.receiver == "controller" and frame.label == "auth_request":
            return self._controller_receive(frame.payload)
        if frame.receiver == "gateway" and frame.label == "connect":
            return self._gateway_receive(frame.payload)
        if frame.receiver in self.uavs and frame.label == "grant":
            return "ignored"
        return "dropped"

    def _controller_receive(self, payload: bytes) -> str:
        try:
            uid, sigma = decode_auth_request(payload)
        except EncodingError:
            return "MalformedFrame"
        try:
            grant = self.controller.authenticate(uid, sigma, self.now, GATEWAY_ADDR, GATEWAY_PORT)
        except (AuthFailure, PolicyFailure) as exc:
            return type(exc).__name__
        except ProtocolError:
            return "ProtocolError"
        name = uid.rstrip(b"\0").decode(errors="replace")
        self.open.send(Frame("controller", name, "open", "grant", grant.m))
        self.secure.send(Frame("controller", "gateway", "secure", "policy",
                               uid + struct.pack(">Q", grant.expiry)))
        if name in self.uavs:
            self.grants[name] = self.uavs[name][0].open_grant(grant.m)
        return "ok"

    def connect(self, name: str) -> str:
        uav, _ = self._uav(name)
        addr, port, _ = self.grants.get(name, (GATEWAY_ADDR, GATEWAY_PORT, uav.uav_id))
        payload = uav.uav_id + bytes(map(int, addr.split("."))) + struct.pack(">H", port)
        frame = self.open.send(Frame(name, "gateway", "open", "connect", payload))
        return self.deliver(frame)

    def _gateway_receive(self, payload: bytes) -> str:
        if len(payload) < 6:
            return "Denied"
        uid, addr, port = payload[:-6], ".".join(map(str, payload[-6:-2])), struct.unpack(">H", payload[-2:])[0]
        out = self.deployment.gateway.connect(uid, addr, port, self.now)
        if isinstance(out, Session):
            return f"Session:{out.session_id}"
        assert isinstance(out, Denied)
        return "Denied"

    # -- adversary -----------------------------------------------------------

    def replay(self, ref: int) -> str:
        f = self.adversary.frame(ref)
        return self.deliver(self.open.send(Frame("adversary", f.receiver, "open", f.label, f.payload)))

    def tamper(self, ref: int, index: int, new_byte: int) -> str:
        f = self.adversary.frame(ref)
        data = bytearray(f.payload)
        if not 0 <= index < len(data):
            raise ScriptError(f"tamper index {index} outside frame of {len(data)} bytes")
        data[index] = new_byte
        return self.deliver(self.open.send(Frame("adversary", f.receiver, "open", f.label, bytes(data))))

    def inject(self, receiver: str, label: str, payload: bytes) -> str:
        return self.deliver(self.open.send(Frame("adversary", receiver, "open", label, payload)))

    def capture(self, name: str) -> UavStoredState:
        uav, _ = self._uav(name)
        state = uav.stored_state()
        self.adversary.captured[name] = state
        return state

    def forge(self, target: str, using: str | None) -> bytes:
        """Best-effort forged auth frame claiming ``target``'s identity.

        With a captured state the adversary signs with its own private key but
        binds the target's on-chain public key into r1/r2; without one it
        uses a random G1 point as the private key.
        """
        uid = make_id(target)
        rec = latest_record(self.chain, uid)
        pk_target = rec.pk_u if rec is not None else cc.h1(uid)
        if using is None:
            sk = cc.scalar_mul(cc.random_scalar(self.rng), cc.GENERATOR)
            pk_c = self.controller.pk_c
        else:
            if using not in self.adversary.captured:
                raise ScriptError(f"UAV {using!r} has not been captured")
            stolen = self.adversary.captured[using]
            sk, pk_c = stolen.sk_u, stolen.pk_c
        pac = SpaPacket(self.rng.randbytes(16), uid, b"guess", self.now, 1, "192.168.1.66", 5000)
        sigma, _ = signcrypt(UavStoredState(uid, pk_target, sk, pk_c), pac, self.rng)
        return encode_auth_request(uid, sigma)


def _sigma_field_index(payload: bytes, name: str, offset: int) -> int:
    id_len = struct.unpack(">I", payload[:4])[0]
    base = 4 + id_len
    e_len = struct.unpack(">I", payload[base:base + 4])[0]
    starts = {
        "e_pac": (base + 4, e_len),
        "v": (base + 4 + e_len, cc.SIZE_ZP),
        "w": (base + 4 + e_len + cc.SIZE_ZP, cc.SIZE_G1),
    }
    if name not in starts:
        raise ScriptError(f"unknown sigma field {name!r}")
    start, width = starts[name]
    if not 0 <= offset < width:
        raise ScriptError(f"offset {offset} outside field {name} of width {width}")
    return start + offset


def _subject(world: World, step: dict) -> str | None:
    """UAV name whose reputation a step can move, if any."""
    if step.get("uav") or step.get("forge_as"):
        return step.get("uav") or step.get("forge_as")
    if step["op"] in ("replay", "tamper") and world.adversary.observed:
        try:
            f = world.adversary.frame(int(step["frame"]))
            if f.label == "auth_request":
                return decode_auth_request(f.payload)[0].rstrip(b"\0").decode()
        except (ScriptError, EncodingError, UnicodeDecodeError, KeyError, ValueError):
            return None
    return None


def _bytes_arg(value) -> bytes | None:
    if value is None:
        return None
    return value.encode() if isinstance(value, str) else bytes(value)


def run_scenario(world: World, steps, name: str = "scenario") -> ScenarioReport:
    """Execute ``steps`` against ``world`` and record every outcome."""
    report = ScenarioReport(name=name, seed=world.seed)
    for i, step in enumerate(steps):
        if not isinstance(step, dict) or "op" not in step:
            raise ScriptError(f"step {i} is not an action object")
        op = step["op"]
        who = _subject(world, step)
        before = world.rep(who) if who else None
        try:
            if op == "register":
                outcome = world.register(step["uav"], _bytes_arg(step.get("pwd")) or b"pw")
            elif op == "auth":
                outcome = world.auth(step["uav"], _bytes_arg(step.get("pwd")), int(step.get("ts_offset", 0)))
            elif op == "gate":
                outcome = world.controller.gate_registration(make_id(step["uav"])).value
            elif op == "connect":
                outcome = world.connect(step["uav"])
            elif op == "advance":
                world.now += int(step["ms"])
                outcome = f"t={world.now}"
            elif op == "eavesdrop":
                outcome = f"observed={len(world.adversary.observed)}"
            elif op == "replay":
                outcome = world.replay(int(step["frame"]))
            elif op == "tamper":
                ref = int(step["frame"])
                if "field" in step:
                    index = _sigma_field_index(world.adversary.frame(ref).payload, step["field"],
                                               int(step.get("offset", 0)))
                else:
                    index = int(step["index"])
                outcome = world.tamper(ref, index, int(step["byte"], 16))
            elif op == "inject":
                if "forge_as" in step:
                    payload = world.forge(step["forge_as"], step.get("using"))
                    outcome = world.inject("controller", "auth_request", payload)
                else:
                    outcome = world.inject(step.get("receiver", "controller"), step.get("label", "auth_request"),
                                           bytes.fromhex(step["payload"]))
            elif op == "capture":
                world.capture(step["uav"])
                outcome = "captured"
            else:
                raise ScriptError(f"unknown op {op!r} at step {i}")
        except (KeyError, ValueError) as exc:
            if isinstance(exc, ScriptError):
                raise
            raise ScriptError(f"malformed step {i}: {exc!r}") from None
        event = {"step": i, "op": op, "outcome": outcome, "t": world.now}
        if who:
            event.update(uav=who, rep_before=before, rep_after=world.rep(who))
        report.events.append(event)

    report.reputations = {n: world.rep(n) for n in sorted(world.uavs)}
    report.chain = {
        "length": len(world.chain),
        "head": world.chain.head.hash.hex(),
        "hashes": [b.hash.hex() for b in world.chain.blocks],
    }
    report.observed_frames = len(world.adversary.observed)
    return report


# ------------------------------------------------------------- scenarios ----

@dataclass(frozen=True)
class Scenario:
    name: str
    steps: tuple
    seed: int = 7
    config: dict = field(default_factory=dict)

    def run(self, seed: int | None = None) -> ScenarioReport:
        s = self.seed if seed is None else seed
        return run_scenario(World(seed=s, **self.config), self.steps, self.name)


def _tamper_steps():
    steps = [{"op": "register", "uav": "A"}, {"op": "auth", "uav": "A"}]
    for fld, offsets in (("e_pac", (0, 17, 40)), ("v", (0, 10, 19)), ("w", (0, 1, 64))):
        for off in offsets:
            steps.append({"op": "tamper", "frame": 0, "field": fld, "offset": off, "byte": "5a"})
    return tuple(steps)


def scenario_suite() -> list:
    reg_a = {"op": "register", "uav": "A"}
    reg_b = {"op": "register", "uav": "B"}
    tick = {"op": "advance", "ms": 1000}
    return [
        Scenario("honest-auth", (reg_a, {"op": "auth", "uav": "A"}, {"op": "connect", "uav": "A"})),
        Scenario("replay", (reg_a, {"op": "auth", "uav": "A"}, {"op": "eavesdrop"}, tick,
                            {"op": "replay", "frame": 0})),
        Scenario("stale-timestamp", (reg_a, {"op": "auth", "uav": "A", "ts_offset": -31_000})),
        Scenario("wrong-password", (reg_a, {"op": "auth", "uav": "A", "pwd": "nope"})),
        Scenario("tamper-each-field", _tamper_steps()),
        Scenario("impersonation-with-random-keys", (reg_b, {"op": "inject", "forge_as": "B", "using": None},
                                                    {"op": "inject", "forge_as": "B", "using": None})),
        Scenario("capture-and-cross-forge", (reg_a, reg_b, {"op": "capture", "uav": "A"},
                                             {"op": "inject", "forge_as": "B", "using": "A"})),
        Scenario("low-reputation-lockout", (reg_a,) + tuple(
            {"op": "auth", "uav": "A", "pwd": "wrong"} for _ in range(4)) + ({"op": "gate", "uav": "A"},
                                                                             {"op": "register", "uav": "A"})),
        Scenario("high-reputation-skip", (reg_a,) + tuple(
            s for _ in range(6) for s in ({"op": "auth", "uav": "A"}, tick)) + ({"op": "gate", "uav": "A"},
                                                                                {"op": "register", "uav": "A"})),
        Scenario("gateway-default-deny", (reg_a, {"op": "connect", "uav": "A"}, {"op": "auth", "uav": "A"},
                                          {"op": "connect", "uav": "A"}, {"op": "advance", "ms": 61_000},
                                          {"op": "connect", "uav": "A"})),
    ]


def load_script(path) -> Scenario:
    """Read ``{"name", "seed", "config", "steps"}`` from a JSON file."""
    with open(path) as fh:
        doc = json.load(fh)
    if not isinstance(doc, dict) or not isinstance(doc.get("steps"), list):
        raise ScriptError("scenario file needs a 'steps' list")
    return Scenario(doc.get("name", str(path)), tuple(doc["steps"]), int(doc.get("seed", 0)),
                    dict(doc.get("config", {})))

"""Pairing-group algebra, hash oracles, symmetric cipher and operation counting.

G1 is the order-r subgroup of the supersingular curve y^2 = x^3 + x over a
512-bit prime field; G2 is the order-r subgroup of F_p^2*.  The pairing is
the symmetric reduced Tate pairing, so ``pairing(a, b) == pairing(b, a)`` and
both arguments come from G1.

Scalars are plain ``int`` values in ``[0, q)`` where ``q`` is the group
order.  Every public group operation ticks the active :class:`OpCounter`
scopes; internal work (hash-to-curve cofactor clearing, subgroup checks on
decode) is not counted.
"""

from __future__ import annotations

import contextlib
import contextvars
import hashlib
import random
import secrets
import struct
from dataclasses import asdict, dataclass, field

from cryptography.hazmat.primitives.ciphers import Cipher, algorithms
from gmpy2 import mpz

from . import _typea

GROUP_ORDER = int(_typea.R)
FIELD_PRIME = int(_typea.P)
COFACTOR = int(_typea.H)

SUPPORTED_K = (160,)
SUPPORTED_L = (256,)

SIZE_G1 = 1 + _typea.FIELD_BYTES  # compressed: tag byte + x
SIZE_G2 = 2 * _typea.FIELD_BYTES
SIZE_ZP = _typea.ORDER_BYTES
KEY_BYTES = 32

TAG_H1 = b"UAVZT-H1"
TAG_H2 = b"UAVZT-H2"
TAG_H3 = b"UAVZT-H3"
TAG_GEN = b"UAVZT-generator"


class EncodingError(ValueError):
    """Raised when bytes do not decode to a valid group element or scalar."""


# ------------------------------------------------------------ counting ----

@dataclass
class OpCounter:
    n_pairing: int = 0
    n_mul_g1: int = 0
    n_add_g1: int = 0
    n_exp_g2: int = 0
    n_mul_g2: int = 0
    n_hash: int = 0

    def as_dict(self) -> dict:
        return asdict(self)

    def reset(self) -> None:
        for name in self.as_dict():
            setattr(self, name, 0)

    def __sub__(self, other: OpCounter) -> OpCounter:
        return OpCounter(**{k: v - getattr(other, k) for k, v in self.as_dict().items()})


_active: contextvars.ContextVar[tuple] = contextvars.ContextVar("uavzt_op_counters", default=())


@contextlib.contextmanager
def count_ops(counter: OpCounter | None = None):
    """Open a measurement scope; nested scopes all see the inner operations."""
    counter = OpCounter() if counter is None else counter
    token = _active.set(_active.get() + (counter,))
    try:
        yield counter
    finally:
        _active.reset(token)


def _tick(name: str) -> None:
    for c in _active.get():
        setattr(c, name, getattr(c, name) + 1)


# ------------------------------------------------------------ elements ----

class G1Elem:
    """Point of the order-q subgroup of E(F_p); immutable."""

    __slots__ = ("_pt",)

    def __init__(self, pt):
        object.__setattr__(self, "_pt", pt)

    def __setattr__(self, name, value):
        raise AttributeError("G1Elem is immutable")

    @property
    def is_identity(self) -> bool:
        return self._pt is None

    def __eq__(self, other):
        return isinstance(other, G1Elem) and self._pt == other._pt

    def __hash__(self):
        return hash(("G1", self._pt))

    def __repr__(self):
        if self._pt is None:
            return "G1Elem(O)"
        return f"G1Elem(x={int(self._pt[0]):#x}"[:28] + "...)"

    def to_bytes(self) -> bytes:
        if self._pt is None:
            return bytes(SIZE_G1)
        x, y = self._pt
        return bytes([2 | int(y & 1)]) + int(x).to_bytes(_typea.FIELD_BYTES, "big")

    @classmethod
    def from_bytes(cls, data: bytes) -> G1Elem:
        if len(data) != SIZE_G1:
            raise EncodingError(f"G1 encoding must be {SIZE_G1} bytes, got {len(data)}")
        tag, x = data[0], int.from_bytes(data[1:], "big")
        if tag == 0:
            if x != 0:
                raise EncodingError("non-canonical identity encoding")
            return cls(None)
        if tag not in (2, 3) or x >= FIELD_PRIME:
            raise EncodingError("bad G1 tag or coordinate")
        x = mpz(x)
        y = _typea.sqrt_fp(x * x * x + x)
        if y is None:
            raise EncodingError("x is not on the curve")
        if (y & 1) != (tag & 1):
            y = _typea.P - y
        pt = (x, y % _typea.P)
        if not _typea.in_subgroup(pt):
            raise EncodingError("point is outside the prime-order subgroup")
        return cls(pt)


class G2Elem:
    """Element of the order-q subgroup of F_p^2* (the pairing target)."""

    __slots__ = ("_v",)

    def __init__(self, v):
        object.__setattr__(self, "_v", v)

    def __setattr__(self, name, value):
        raise AttributeError("G2Elem is immutable")

    @property
    def is_identity(self) -> bool:
        return self._v == _typea.ONE2

    def __eq__(self, other):
        return isinstance(other, G2Elem) and self._v == other._v

    def __hash__(self):
        return hash(("G2", self._v))

    def __repr__(self):
        return f"G2Elem(a={int(self._v[0]):#x}"[:28] + "...)"

    def to_bytes(self) -> bytes:
        a, b = self._v
        n = _typea.FIELD_BYTES
        return int(a).to_bytes(n, "big") + int(b).to_bytes(n, "big")

    @classmethod
    def from_bytes(cls, data: bytes) -> G2Elem:
        n = _typea.FIELD_BYTES
        if len(data) != SIZE_G2:
            raise EncodingError(f"G2 encoding must be {SIZE_G2} bytes, got {len(data)}")
        a, b = int.from_bytes(data[:n], "big"), int.from_bytes(data[n:], "big")
        if a >= FIELD_PRIME or b >= FIELD_PRIME:
            raise EncodingError("coordinate out of range")
        v = (mpz(a), mpz(b))
        if not _typea.unitary(v) or _typea.f2_pow_unitary(v, _typea.R) != _typea.ONE2:
            raise EncodingError("value is outside the order-q subgroup")
        return cls(v)


def scalar_to_bytes(s: int) -> bytes:
    if not 0 <= s < GROUP_ORDER:
        raise ValueError("scalar out of range")
    return s.to_bytes(SIZE_ZP, "big")


def scalar_from_bytes(data: bytes) -> int:
    if len(data) != SIZE_ZP:
        raise EncodingError(f"scalar encoding must be {SIZE_ZP} bytes")
    s = int.from_bytes(data, "big")
    if s >= GROUP_ORDER:
        raise EncodingError("scalar not reduced modulo the group order")
    return s


def random_scalar(rng: random.Random | None = None) -> int:
    """Uniform element of Z_q^* (never zero)."""
    rng = rng or secrets.SystemRandom()
    return rng.randrange(1, GROUP_ORDER)


def g1_identity() -> G1Elem:
    return G1Elem(None)


def g2_identity() -> G2Elem:
    return G2Elem(_typea.ONE2)


# -------------------------------------------------------------- params ----

def _expand(tag: bytes, counter: int, data: bytes, n: int) -> bytes:
    h = hashlib.shake_256()
    h.update(struct.pack(">H", len(tag)) + tag + struct.pack(">I", counter))
    h.update(data)
    return h.digest(n)


GENERATOR = G1Elem(_typea.map_to_point(lambda c, d: _expand(TAG_GEN, c, d, 80), b""))


@dataclass(frozen=True)
class SystemParams:
    k: int
    l: int
    order: int = GROUP_ORDER
    field_prime: int = FIELD_PRIME
    cofactor: int = COFACTOR
    generator: G1Elem = field(default=GENERATOR, repr=False)
    curve: str = "y^2 = x^3 + x over F_p (supersingular, embedding degree 2)"
    hash_tags: tuple = (TAG_H1, TAG_H2, TAG_H3)

    @property
    def key_bytes(self) -> int:
        return self.l // 8


def setup(k: int = 160, l: int = 256, rng: random.Random | None = None):
    """Return ``(params, spk, ssk)`` with ``spk = ssk * G``.

    ``ssk`` is the master secret; only the key generation center should
    hold it.
    """
    if k not in SUPPORTED_K:
        raise ValueError(f"unsupported security parameter k={k}; backend offers {SUPPORTED_K}")
    if l not in SUPPORTED_L:
        raise ValueError(f"unsupported key length l={l}; backend offers {SUPPORTED_L}")
    params = SystemParams(k=k, l=l)
    ssk = random_scalar(rng)
    spk = G1Elem(_typea.mul(ssk, GENERATOR._pt))
    return params, spk, ssk


# -------------------------------------------------------------- hashes ----

def h1(data: bytes) -> G1Elem:
    """Hash arbitrary bytes onto G1."""
    _tick("n_hash")
    return G1Elem(_typea.map_to_point(lambda c, d: _expand(TAG_H1, c, d, 80), bytes(data)))


def h2(z: G2Elem, nbytes: int = KEY_BYTES) -> bytes:
    """Derive an ``8*nbytes``-bit symmetric key from a target-group element."""
    if not isinstance(z, G2Elem) or z._v == (0, 0):
        raise ValueError("h2 needs a nonzero G2 element")
    _tick("n_hash")
    return _expand(TAG_H2, 0, z.to_bytes(), nbytes)


def h3(data: bytes, r: G2Elem) -> int:
    """Hash ``(data, r)`` to a nonzero scalar; ``data`` may have any length."""
    _tick("n_hash")
    msg = struct.pack(">Q", len(data)) + bytes(data) + r.to_bytes()
    wide = int.from_bytes(_expand(TAG_H3, 0, msg, SIZE_ZP + 16), "big")
    return wide % (GROUP_ORDER - 1) + 1


# ------------------------------------------------------------- algebra ----

def pairing(a: G1Elem, b: G1Elem) -> G2Elem:
    if not isinstance(a, G1Elem) or not isinstance(b, G1Elem):
        raise TypeError("pairing takes two G1 elements")
    _tick("n_pairing")
    return G2Elem(_typea.tate(a._pt, b._pt))


def scalar_mul(s: int, pt: G1Elem) -> G1Elem:
    _tick("n_mul_g1")
    return G1Elem(_typea.mul(s % GROUP_ORDER, pt._pt))


def g1_add(p1: G1Elem, p2: G1Elem) -> G1Elem:
    _tick("n_add_g1")
    return G1Elem(_typea.add(p1._pt, p2._pt))


def g1_neg(pt: G1Elem) -> G1Elem:
    return G1Elem(_typea.neg(pt._pt))


def g2_exp(z: G2Elem, s: int) -> G2Elem:
    _tick("n_exp_g2")
    return G2Elem(_typea.f2_pow_unitary(z._v, s % GROUP_ORDER))


def g2_mul(z1: G2Elem, z2: G2Elem) -> G2Elem:
    _tick("n_mul_g2")
    return G2Elem(_typea.f2_mul(z1._v, z2._v))


# ------------------------------------------------------ symmetric cipher ----

def _keystream_cipher(key: bytes, nonce: int) -> Cipher:
    if len(key) != KEY_BYTES:
        raise ValueError(f"symmetric key must be {KEY_BYTES} bytes")
    # ChaCha20 nonce block = 4-byte counter || 12-byte nonce
    return Cipher(algorithms.ChaCha20(bytes(key), bytes(4) + nonce.to_bytes(12, "big")), mode=None)


def sym_encrypt(key: bytes, plaintext: bytes, nonce: int = 0) -> bytes:
    """Length-preserving stream encryption; no integrity of its own."""
    enc = _keystream_cipher(key, nonce).encryptor()
    return enc.update(bytes(plaintext)) + enc.finalize()


def sym_decrypt(key: bytes, ciphertext: bytes, nonce: int = 0) -> bytes:
    dec = _keystream_cipher(key, nonce).decryptor()
    return dec.update(bytes(ciphertext)) + dec.finalize()

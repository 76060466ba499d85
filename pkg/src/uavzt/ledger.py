"""Append-only hash-chained ledger of ``<uav_id, pk_u, rep>`` records.

There is a single trusted writer (KGC / controller) and no consensus; the
chain is an audit store.  Lookups scan backwards from the newest block.
"""

from __future__ import annotations

import hashlib
import json
import struct
import threading
import time
from dataclasses import dataclass, replace
from typing import Callable, Iterator

from .crypto_core import SIZE_G1, EncodingError, G1Elem

MAGIC = b"ZTCHAIN1"
DEFAULT_DIGEST = "sha256"
HASH_LEN = 32


class LedgerError(Exception):
    pass


class ReputationDeltaError(LedgerError):
    """A reputation update did not move the counter by exactly one unit."""


class LedgerFormatError(LedgerError):
    pass


def _lp(b: bytes) -> bytes:
    return struct.pack(">I", len(b)) + b


@dataclass(frozen=True)
class LedgerRecord:
    uav_id: bytes
    pk_u: G1Elem
    rep: int

    def encode(self) -> bytes:
        return _lp(self.uav_id) + self.pk_u.to_bytes() + struct.pack(">q", self.rep)


@dataclass(frozen=True)
class Block:
    index: int
    prev_hash: bytes
    timestamp: int
    txs: tuple
    hash: bytes
    meta: bytes = b""

    def header_bytes(self) -> bytes:
        out = [struct.pack(">Q", self.index), self.prev_hash, struct.pack(">Q", self.timestamp), _lp(self.meta)]
        out.append(struct.pack(">I", len(self.txs)))
        out.extend(tx.encode() for tx in self.txs)
        return b"".join(out)

    def compute_hash(self, digest: str) -> bytes:
        return hashlib.new(digest, self.header_bytes()).digest()

    def to_bytes(self) -> bytes:
        return self.header_bytes() + self.hash


class _Reader:
    def __init__(self, data: bytes):
        self.data = data
        self.pos = 0

    def take(self, n: int) -> bytes:
        if n < 0 or self.pos + n > len(self.data):
            raise LedgerFormatError("truncated chain data")
        out = self.data[self.pos:self.pos + n]
        self.pos += n
        return out

    def u32(self) -> int:
        return struct.unpack(">I", self.take(4))[0]

    def u64(self) -> int:
        return struct.unpack(">Q", self.take(8))[0]


def _read_block(rd: _Reader, hash_len: int) -> Block:
    index = rd.u64()
    prev = rd.take(hash_len)
    ts = rd.u64()
    meta = rd.take(rd.u32())
    txs = []
    for _ in range(rd.u32()):
        uid = rd.take(rd.u32())
        try:
            pk = G1Elem.from_bytes(rd.take(SIZE_G1))
        except EncodingError as exc:
            raise LedgerFormatError(f"bad public key in block {index}: {exc}") from None
        rep = struct.unpack(">q", rd.take(8))[0]
        txs.append(LedgerRecord(uid, pk, rep))
    return Block(index, prev, ts, tuple(txs), rd.take(hash_len), meta)


class Chain:
    """Ordered list of blocks starting from a genesis block.

    The digest algorithm is recorded in the genesis block's ``meta`` field.
    ``clock`` returns milliseconds and is injectable for deterministic runs.
    """

    def __init__(self, digest: str = DEFAULT_DIGEST, clock: Callable[[], int] | None = None,
                 blocks: list | None = None):
        self.clock = clock or (lambda: int(time.time() * 1000))
        self._lock = threading.Lock()
        if blocks is not None:
            self.blocks = list(blocks)
            self.digest = self.blocks[0].meta.decode("ascii", "replace")
            return
        if hashlib.new(digest).digest_size != HASH_LEN:
            raise LedgerError(f"{digest} is not a 256-bit digest")
        self.digest = digest
        gen = Block(0, bytes(HASH_LEN), self.clock(), (), b"", digest.encode())
        self.blocks = [replace(gen, hash=gen.compute_hash(digest))]

    def __len__(self):
        return len(self.blocks)

    @property
    def head(self) -> Block:
        return self.blocks[-1]

    def records(self) -> Iterator[LedgerRecord]:
        for b in self.blocks:
            yield from b.txs

    # -- serialization -----------------------------------------------------

    def to_bytes(self) -> bytes:
        parts = [MAGIC, struct.pack(">I", len(self.blocks))]
        parts.extend(_lp(b.to_bytes()) for b in list(self.blocks))
        return b"".join(parts)

    @classmethod
    def from_bytes(cls, data: bytes, clock: Callable[[], int] | None = None) -> Chain:
        rd = _Reader(bytes(data))
        if rd.take(len(MAGIC)) != MAGIC:
            raise LedgerFormatError("bad magic")
        n = rd.u32()
        if n == 0:
            raise LedgerFormatError("chain has no genesis block")
        blocks = []
        for _ in range(n):
            body = _Reader(rd.take(rd.u32()))
            blk = _read_block(body, HASH_LEN)
            if body.pos != len(body.data):
                raise LedgerFormatError("trailing bytes in block")
            blocks.append(blk)
        if rd.pos != len(rd.data):
            raise LedgerFormatError("trailing bytes after chain")
        return cls(clock=clock, blocks=blocks)

    def to_json(self) -> str:
        return json.dumps({
            "digest": self.digest,
            "blocks": [{
                "index": b.index,
                "prev_hash": b.prev_hash.hex(),
                "timestamp": b.timestamp,
                "meta": b.meta.hex(),
                "txs": [{"uav_id": t.uav_id.hex(), "pk_u": t.pk_u.to_bytes().hex(), "rep": t.rep} for t in b.txs],
                "hash": b.hash.hex(),
            } for b in self.blocks],
        }, indent=2)

    @classmethod
    def from_json(cls, text: str, clock: Callable[[], int] | None = None) -> Chain:
        doc = json.loads(text)
        blocks = [Block(
            index=b["index"],
            prev_hash=bytes.fromhex(b["prev_hash"]),
            timestamp=b["timestamp"],
            txs=tuple(LedgerRecord(bytes.fromhex(t["uav_id"]), G1Elem.from_bytes(bytes.fromhex(t["pk_u"])), t["rep"])
                      for t in b["txs"]),
            hash=bytes.fromhex(b["hash"]),
            meta=bytes.fromhex(b["meta"]),
        ) for b in doc["blocks"]]
        return cls(clock=clock, blocks=blocks)


# -------------------------------------------------------------- operations ----

def append_block(chain: Chain, txs) -> Block:
    txs = tuple(txs)
    if not txs:
        raise LedgerError("a block needs at least one transaction")
    with chain._lock:
        head = chain.head
        draft = Block(head.index + 1, head.hash, chain.clock(), txs, b"")
        blk = replace(draft, hash=draft.compute_hash(chain.digest))
        chain.blocks.append(blk)
    return blk


def latest_record(chain: Chain, uav_id: bytes) -> LedgerRecord | None:
    """Newest record for ``uav_id``, found by scanning blocks backwards."""
    for blk in reversed(chain.blocks):
        for tx in reversed(blk.txs):
            if tx.uav_id == uav_id:
                return tx
    return None


def record_registration(chain: Chain, uav_id: bytes, pk_u: G1Elem) -> Block:
    """Store a (re-)registered key; reputation starts at 0 and is otherwise carried over."""
    prior = latest_record(chain, uav_id)
    rep = 0 if prior is None else prior.rep
    return append_block(chain, [LedgerRecord(uav_id, pk_u, rep)])


def record_reputation(chain: Chain, uav_id: bytes, pk_u: G1Elem, new_rep: int) -> Block:
    prior = latest_record(chain, uav_id)
    if prior is None:
        if new_rep != 0:
            raise ReputationDeltaError("first record for a UAV must carry reputation 0")
    elif abs(new_rep - prior.rep) != 1:
        raise ReputationDeltaError(f"reputation may move by one unit, not {prior.rep} -> {new_rep}")
    return append_block(chain, [LedgerRecord(uav_id, pk_u, new_rep)])


def validate_chain(chain) -> bool:
    """Recompute every hash and link.  Accepts a :class:`Chain` or its binary export."""
    if isinstance(chain, (bytes, bytearray)):
        try:
            chain = Chain.from_bytes(chain)
        except (LedgerFormatError, EncodingError, ValueError):
            return False
    blocks = chain.blocks
    if not blocks:
        return False
    gen = blocks[0]
    try:
        digest = gen.meta.decode("ascii")
        if hashlib.new(digest).digest_size != HASH_LEN:
            return False
    except (UnicodeDecodeError, ValueError, TypeError):
        return False
    if digest != chain.digest or gen.index != 0 or gen.prev_hash != bytes(HASH_LEN) or gen.txs:
        return False
    for i, blk in enumerate(blocks):
        if blk.index != i or blk.compute_hash(digest) != blk.hash:
            return False
        if i and (blk.prev_hash != blocks[i - 1].hash or blk.meta or not blk.txs):
            return False
    return True


def reputation_history(chain: Chain) -> dict:
    """Replay the chain front to back: ``uav_id -> [rep, rep, ...]``."""
    hist: dict = {}
    for tx in chain.records():
        hist.setdefault(tx.uav_id, []).append(tx.rep)
    return hist

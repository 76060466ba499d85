"""
Hash-chained reputation ledger
==============================

"""

from uavzt import crypto_core as cc
from uavzt.ledger import (
    Chain, ReputationDeltaError, latest_record, record_registration, record_reputation, reputation_history, validate_chain,
)

t = [0]
chain = Chain(clock=lambda: t[0])
uid = b"uav-A".ljust(20, b"\0")
pk = cc.h1(uid)

record_registration(chain, uid, pk)
for rep in (1, 2, 1, 0, -1):
    t[0] += 1000
    record_reputation(chain, uid, pk, rep)

print("blocks:", len(chain))
print("latest rep:", latest_record(chain, uid).rep)
print("history:", reputation_history(chain)[uid])
print("valid:", validate_chain(chain))

# reputation moves one step at a time
try:
    record_reputation(chain, uid, pk, 5)
except ReputationDeltaError as exc:
    print("refused:", exc)

# flipping a byte anywhere in the export breaks validation
blob = bytearray(chain.to_bytes())
blob[len(blob) // 2] ^= 0x01
print("tampered export valid:", validate_chain(bytes(blob)))

"""
Pairings and the operation counter
==================================

"""

from uavzt import crypto_core as cc

params, spk, ssk = cc.setup()
G = params.generator
print("group order bits:", cc.GROUP_ORDER.bit_length())
print("field prime bits:", cc.FIELD_PRIME.bit_length())

# bilinearity: e(aG, bG) == e(G, G)^(ab)
a, b = cc.random_scalar(), cc.random_scalar()
lhs = cc.pairing(cc.scalar_mul(a, G), cc.scalar_mul(b, G))
rhs = cc.g2_exp(cc.pairing(G, G), a * b % cc.GROUP_ORDER)
print("bilinear:", lhs == rhs)

# identities hash straight into the prime-order subgroup
pk = cc.h1(b"controller-01")
print("h1 point, compressed:", pk.to_bytes().hex()[:32], "...", len(pk.to_bytes()), "bytes")

# every public operation ticks the innermost active counters
with cc.count_ops() as ops:
    z = cc.pairing(spk, pk)
    key = cc.h2(z)
print(ops.as_dict())

msg = b"open port 443 for uav-7"
ct = cc.sym_encrypt(key, msg)
print(ct.hex())
print(cc.sym_decrypt(key, ct))

"""
Registration, signcrypted SPA packet and gateway grant
======================================================

"""

from uavzt import crypto_core as cc
from uavzt.ledger import latest_record
from uavzt.protocol import Deployment

now = [1_700_000_000_000]
dep = Deployment.create(seed=1, clock=lambda: now[0])

# registration: gate, PUF challenge, keys issued, pk recorded on chain
uav = dep.new_uav("drone-7", pwd=b"s3cret")
print("rep after registration:", latest_record(dep.chain, uav.uav_id).rep)

pac = uav.build_packet(b"s3cret", 1, "192.168.1.10", 5000, now[0])
with cc.count_ops() as uav_ops:
    sigma = uav.signcrypt(pac)
print("sigma bytes:", sigma.wire_size(), "uav ops:", uav_ops.as_dict())

with cc.count_ops() as ctl_ops:
    got = dep.controller.unsigncrypt(uav.uav_id, sigma.to_bytes())
print("controller ops:", ctl_ops.as_dict())
print("decoded identical:", got == pac)

dep.controller.policy_check(got, now[0])
grant = dep.controller.grant(uav.uav_id, "10.0.0.2", 443, now[0])
print("grant opened by uav:", uav.open_grant(grant.m))
print("rep after success:", latest_record(dep.chain, uav.uav_id).rep)

print(dep.gateway.connect(uav.uav_id, "10.0.0.2", 443, now[0] + 5))
print(dep.gateway.connect(uav.uav_id, "10.0.0.2", 22, now[0] + 5))

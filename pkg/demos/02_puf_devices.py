"""
Simulated PUF devices
=====================

"""

import random

from uavzt.puf_sim import PufDevice

rng = random.Random(2024)
clean = PufDevice.manufacture(rng)
noisy = PufDevice.manufacture(rng, noise_rate=0.05)
other = PufDevice.manufacture(rng)

challenge = rng.randbytes(32)

# a noiseless device is a fixed function of the challenge
r1 = clean.evaluate(challenge)
print(r1.hex())
print("repeatable:", r1 == clean.evaluate(challenge))

# two devices disagree on about half the bits
diff = sum(bin(x ^ y).count("1") for x, y in zip(r1, other.evaluate(challenge)))
print("inter-device hamming distance:", diff, "of 256")

# with noise the same device flips a few bits per read
a, b = noisy.evaluate(challenge), noisy.evaluate(challenge)
print("intra-device flips:", sum(bin(x ^ y).count("1") for x, y in zip(a, b)))

# the secret is not printable or picklable
print(repr(clean))

"""Software PUF: a keyed PRF standing in for device manufacturing variation."""

from __future__ import annotations

import hashlib
import hmac
import random
import secrets

RESPONSE_BYTES = 32
CHALLENGE_BYTES = 32


class PufDevice:
    """Challenge-response oracle bound to a hidden per-device seed.

    The seed is never exposed.  With ``noise_rate > 0`` every response bit
    flips independently with that probability, drawn from ``noise_rng``.
    """

    __slots__ = ("__secret", "noise_rate", "_noise_rng")

    def __init__(self, device_secret: bytes, noise_rate: float = 0.0, noise_rng: random.Random | None = None):
        if len(device_secret) != 32:
            raise ValueError("device secret must be 32 bytes")
        if not 0.0 <= noise_rate <= 1.0:
            raise ValueError("noise_rate must lie in [0, 1]")
        self.__secret = bytes(device_secret)
        self.noise_rate = noise_rate
        self._noise_rng = noise_rng or random.Random()

    @classmethod
    def manufacture(cls, rng: random.Random | None = None, noise_rate: float = 0.0) -> PufDevice:
        rng = rng or secrets.SystemRandom()
        return cls(rng.randbytes(32), noise_rate=noise_rate, noise_rng=random.Random(rng.getrandbits(64)))

    def __repr__(self):
        return f"PufDevice(noise_rate={self.noise_rate})"

    def __reduce__(self):
        raise TypeError("PufDevice cannot be serialized")

    def evaluate(self, challenge: bytes) -> bytes:
        if not challenge:
            raise ValueError("challenge must be non-empty")
        response = hmac.new(self.__secret, bytes(challenge), hashlib.sha256).digest()
        if self.noise_rate == 0.0:
            return response
        out = int.from_bytes(response, "big")
        for bit in range(8 * RESPONSE_BYTES):
            if self._noise_rng.random() < self.noise_rate:
                out ^= 1 << bit
        return out.to_bytes(RESPONSE_BYTES, "big")


def evaluate(device: PufDevice, challenge: bytes) -> bytes:
    return device.evaluate(challenge)

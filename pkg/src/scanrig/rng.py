"""Deterministic pseudo-random primitives shared by every component.

All randomness in the suite (mock sensor data, projector patterns, reconnect
jitter) flows through splitmix64 so that a seed fully determines a run. The
scalar generator is the reference; the numpy path exists because filling a
couple of megabytes per frame in pure Python is far too slow.
"""

from __future__ import annotations

import hashlib

import numpy as np

MASK64 = (1 << 64) - 1
GOLDEN_GAMMA = 0x9E3779B97F4A7C15


def mix64(z: int) -> int:
    """Finalizer applied to the raw counter state."""
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9 & MASK64
    z = (z ^ (z >> 27)) * 0x94D049BB133111EB & MASK64
    return (z ^ (z >> 31)) & MASK64


class SplitMix64:
    """Scalar splitmix64 stream.

    Matches the published reference: state advances by the golden gamma and
    each output is the mixed state. Output i (0-based) for seed s is therefore
    mix64(s + (i + 1) * GOLDEN_GAMMA), which is what the vectorized helpers
    exploit.
    """

    __slots__ = ("state",)

    def __init__(self, seed: int):
        self.state = seed & MASK64

    def next_u64(self) -> int:
        self.state = (self.state + GOLDEN_GAMMA) & MASK64
        return mix64(self.state)

    def next_float(self) -> float:
        # 53-bit mantissa, uniform in [0, 1)
        return (self.next_u64() >> 11) * (2.0**-53)

    def next_symmetric(self, radius: float) -> float:
        """Uniform draw in [-radius, +radius]."""
        return (2.0 * self.next_float() - 1.0) * radius


def u64_stream(seed: int, count: int) -> np.ndarray:
    """First `count` outputs of SplitMix64(seed) as a uint64 array."""
    if count < 0:
        raise ValueError("count must be non-negative")
    idx = np.arange(1, count + 1, dtype=np.uint64)
    states = (np.uint64(seed & MASK64) + idx * np.uint64(GOLDEN_GAMMA)).astype(np.uint64)
    z = states
    z = (z ^ (z >> np.uint64(30))) * np.uint64(0xBF58476D1CE4E5B9)
    z = (z ^ (z >> np.uint64(27))) * np.uint64(0x94D049BB133111EB)
    return z ^ (z >> np.uint64(31))


def byte_stream(seed: int, nbytes: int) -> bytes:
    """First `nbytes` bytes of the stream, each u64 serialized big-endian."""
    if nbytes < 0:
        raise ValueError("nbytes must be non-negative")
    words = (nbytes + 7) // 8
    return u64_stream(seed, words).astype(">u8").tobytes()[:nbytes]


def derive_seed(*parts: str) -> int:
    """Stable 64-bit seed from string context (session id, node id, phase...).

    First 8 bytes of sha256 over the '|'-joined parts, big-endian.
    """
    digest = hashlib.sha256("|".join(parts).encode("utf-8")).digest()
    return int.from_bytes(digest[:8], "big")

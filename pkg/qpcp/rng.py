from __future__ import annotations

import hashlib

import numpy as np

SEED_MASK = 0xffffffffffffffff


def _key(seed: int, label: str) -> int:
    h = hashlib.blake2b(digest_size=16)
    h.update(int(seed & SEED_MASK).to_bytes(8, "little"))
    h.update(label.encode("utf-8"))
    return int.from_bytes(h.digest(), "little")


class RandomStream:
    """Counter-based random stream addressed by a master seed and a label path.

    Substreams with the same (seed, label) always produce the same draws, no matter
    which other substreams were used before."""

    def __init__(self, seed: int, label: str = ""):
        self.seed = int(seed) & SEED_MASK
        self.label = label
        self.generator = np.random.Generator(np.random.Philox(key=_key(self.seed, label)))

    def child(self, label: str) -> RandomStream:
        return RandomStream(self.seed, f"{self.label}/{label}" if self.label else label)

    def __repr__(self):
        return f"RandomStream(seed={self.seed}, label={self.label!r})"


def as_stream(rng, label: str = "") -> RandomStream:
    if isinstance(rng, RandomStream):
        return rng
    if rng is None:
        return RandomStream(0, label)
    return RandomStream(int(rng), label)

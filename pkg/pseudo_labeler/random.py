"""
Seeded random streams with key-based splitting
"""
import hashlib

import numpy as np

MASK64 = (1 << 64) - 1


def key_to_int(key):
    """Turn a stream key (int or str) into a non-negative 64-bit integer"""
    if isinstance(key, (int, np.integer)):
        return int(key) & MASK64
    digest = hashlib.blake2b(str(key).encode("utf-8"), digest_size=8).digest()
    return int.from_bytes(digest, "little")


class Random:
    """Random stream identified by (seed, key...).

    Children are derived from the key path, never from how many values the
    parent has drawn, so the result of any stage does not depend on the
    order in which stages or frames run.
    """

    def __init__(self, seed=0, key=()):
        self.seed = int(seed) & MASK64
        self.key = tuple(key_to_int(k) for k in key)
        seq = np.random.SeedSequence(entropy=self.seed, spawn_key=self.key)
        self._gen = np.random.default_rng(seq)

    def __repr__(self):
        return f"Random(seed={self.seed}, key={self.key})"

    def child(self, *key):
        """Independent stream for a sub-task"""
        return Random(self.seed, self.key + tuple(key_to_int(k) for k in key))

    def float(self, size=None):
        """Uniform in [0, 1)"""
        return self._gen.random(size)

    def uniform(self, low, high, size=None):
        return self._gen.uniform(low, high, size)

    def normal(self, sigma=1.0, size=None):
        return self._gen.normal(0.0, sigma, size)

    def int(self, min_val, max_val):
        """Random integer in [min, max)"""
        return int(self._gen.integers(min_val, max_val))

    def bool(self, chance=0.5):
        return bool(self._gen.random() < chance)

    def sample(self, n, k):
        """k distinct indices from range(n), returned sorted"""
        picked = self._gen.choice(n, size=k, replace=False)
        return sorted(int(i) for i in picked)

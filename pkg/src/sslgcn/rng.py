"""Seeded randomness.

All stochastic choices in the package (initialization, dropout masks,
corruption sampling, negative sampling) draw from an `Rng`, which wraps
numpy's Philox counter-based bit generator. The algorithm is pinned:
reproducibility is defined per release of this package, for a fixed
numpy build, single-threaded.

Sub-streams are derived by key-splitting: ``rng.split(label)`` seeds a
child generator from ``SeedSequence((seed, crc32(label)))``, so streams
for different labels are independent and do not depend on the order in
which they are created.
"""

from __future__ import annotations

import zlib

import numpy as np


def _key(part) -> int:
    if isinstance(part, str):
        return zlib.crc32(part.encode("utf-8"))
    return int(part) & 0xFFFFFFFFFFFFFFFF


class Rng:
    """Deterministic random stream with derivable sub-streams."""

    def __init__(self, seed, _path=()):
        self.seed = int(seed)
        self._path = tuple(_path)
        self._gen = np.random.Generator(
            np.random.Philox(np.random.SeedSequence((self.seed,) + self._path))
        )

    def split(self, *labels) -> "Rng":
        """Derive an independent child stream keyed by `labels`."""
        return Rng(self.seed, self._path + tuple(_key(p) for p in labels))

    # Thin pass-throughs used by the rest of the package.

    def uniform(self, low=0.0, high=1.0, size=None):
        return self._gen.uniform(low, high, size)

    def random(self, size=None, dtype=np.float64):
        return self._gen.random(size, dtype=dtype)

    def integers(self, low, high=None, size=None):
        return self._gen.integers(low, high, size)

    def permutation(self, n):
        return self._gen.permutation(n)

    def choice_without_replacement(self, n, k):
        """k distinct integers from range(n), uniform."""
        return self._gen.choice(n, size=k, replace=False)

"""Counter-based, splittable random streams.

Every source of randomness in the project (dataset generation, parameter
init, Gumbel noise, dropout masks, shuffles) draws from an `RngStream`.
The generator is splitmix64 evaluated at an explicit counter, so draws are
random-access, reproducible across platforms (pure uint64 arithmetic plus
IEEE float ops), and streams can be forked by label without coordination.
"""

from __future__ import annotations

import numpy as np

_GAMMA = np.uint64(0x9E3779B97F4A7C15)
_M1 = np.uint64(0xBF58476D1CE4E5B9)
_M2 = np.uint64(0x94D049BB133111EB)
_FNV_OFFSET = 0xCBF29CE484222325
_FNV_PRIME = 0x100000001B3
_U64 = (1 << 64) - 1

ALGORITHM = "splitmix64"


def _mix(z: np.ndarray) -> np.ndarray:
    # splitmix64 finalizer; z is a uint64 array
    z = (z ^ (z >> np.uint64(30))) * _M1
    z = (z ^ (z >> np.uint64(27))) * _M2
    return z ^ (z >> np.uint64(31))


def _fnv1a(label: str) -> int:
    h = _FNV_OFFSET
    for byte in label.encode("utf-8"):
        h = ((h ^ byte) * _FNV_PRIME) & _U64
    return h


class RngStream:
    """Deterministic stream of draws identified by (seed, counter).

    Equal seeds yield bit-identical draw sequences. `derive` forks an
    independent child stream from a string label; forking does not consume
    draws from the parent.
    """

    algorithm = ALGORITHM

    def __init__(self, seed: int, counter: int = 0):
        self.seed = int(seed) & _U64
        self.counter = int(counter)

    def __repr__(self) -> str:
        return f"RngStream(seed={self.seed:#x}, counter={self.counter}, algorithm={self.algorithm!r})"

    def derive(self, label: str) -> "RngStream":
        child_seed = int(_mix(np.array([self.seed ^ _fnv1a(label)], dtype=np.uint64))[0])
        return RngStream(child_seed)

    def _raw(self, n: int) -> np.ndarray:
        idx = np.arange(self.counter + 1, self.counter + n + 1, dtype=np.uint64)
        self.counter += n
        return _mix(np.array([self.seed], dtype=np.uint64) + idx * _GAMMA)

    def uniform(self, shape=None) -> "np.ndarray | float":
        """Uniform float64 in [0, 1); scalar when shape is None."""
        if shape is None:
            return float(self._raw(1)[0] >> np.uint64(11)) * 2.0**-53
        n = int(np.prod(shape)) if np.ndim(shape) else int(shape)
        out = (self._raw(n) >> np.uint64(11)).astype(np.float64) * 2.0**-53
        return out.reshape(shape)

    def uniform_range(self, low: float, high: float, shape=None):
        u = self.uniform(shape)
        return low + (high - low) * u

    def integers(self, low: int, high: int, shape=None):
        """Uniform integers in [low, high); scalar int when shape is None."""
        if high <= low:
            raise ValueError(f"empty integer range [{low}, {high})")
        span = high - low
        if shape is None:
            return low + int(self.uniform() * span)
        u = self.uniform(shape)
        return low + (u * span).astype(np.int64)

    def gumbel(self, shape=None):
        """Standard Gumbel(0, 1) noise via inverse transform."""
        u = self.uniform(shape)
        tiny = np.finfo(np.float64).tiny
        return -np.log(-np.log(np.maximum(u, tiny)))

    def bernoulli(self, p: float, shape=None):
        """Boolean draws, True with probability p."""
        return self.uniform(shape) < p

    def permutation(self, n: int) -> np.ndarray:
        """Fisher-Yates permutation of range(n), fully determined by the stream."""
        perm = np.arange(n)
        u = self.uniform(n - 1) if n > 1 else np.empty(0)
        for i in range(n - 1, 0, -1):
            j = int(u[n - 1 - i] * (i + 1))
            perm[i], perm[j] = perm[j], perm[i]
        return perm

    def choice(self, options):
        return options[self.integers(0, len(options))]

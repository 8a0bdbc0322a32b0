"""Deterministic seeded randomness.

A SeedStream is an xoshiro256** generator whose 256-bit state is derived from
(seed, stream_id) with splitmix64, so equal pairs replay identical sequences
and distinct stream ids from one seed look independent.

Draw semantics (fixed, relied on by checkpoint/metrics determinism):
  * raw 64-bit words come straight from xoshiro256**;
  * uniforms are 53-bit: (word >> 11) * 2**-53, in [0, 1);
  * gaussians are Box-Muller pairs over two consecutive uniforms,
    cos-term first; an odd trailing draw caches the sine half on the
    stream, so gaussians(a) then gaussians(b) equals gaussians(a + b);
  * the pending gaussian half survives interleaved uniform/u64/shuffle
    draws (those consume raw words directly);
  * permutations are Fisher-Yates with masked-rejection index draws.
"""

from __future__ import annotations

import numpy as np

from . import _kernels

_MASK64 = 0xFFFFFFFFFFFFFFFF
_GOLDEN = 0x9E3779B97F4A7C15
_STREAM_SALT = 0x6A09E667F3BCC908


def _mix64(x: int) -> int:
    """splitmix64 finalizer: one increment plus the two-multiply avalanche."""
    x = (x + _GOLDEN) & _MASK64
    x = ((x ^ (x >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
    x = ((x ^ (x >> 27)) * 0x94D049BB133111EB) & _MASK64
    return x ^ (x >> 31)


def _derive_state(seed: int, stream_id: int) -> np.ndarray:
    h = _mix64(seed) ^ _mix64(stream_id ^ _STREAM_SALT)
    s = np.empty(4, dtype=np.uint64)
    x = h
    for i in range(4):
        x = (x + _GOLDEN) & _MASK64
        s[i] = _mix64(x)
    if not s.any():  # xoshiro state must never be all zero
        s[0] = np.uint64(_GOLDEN)
    return s


class SeedStream:
    """Deterministic random stream identified by (seed, stream_id)."""

    def __init__(self, seed: int, stream_id: int = 0):
        seed = int(seed)
        stream_id = int(stream_id)
        if not 0 <= seed <= _MASK64:
            raise ValueError(f"seed must fit in 64 bits, got {seed}")
        if not 0 <= stream_id <= _MASK64:
            raise ValueError(f"stream_id must fit in 64 bits, got {stream_id}")
        self.seed = seed
        self.stream_id = stream_id
        self._s = _derive_state(seed, stream_id)
        # [flag, value] for the cached Box-Muller sine half
        self._pending = np.zeros(2, dtype=np.float64)

    def spawn(self, index: int) -> "SeedStream":
        """Child stream for a fixed purpose/index; same seed, scrambled id."""
        return SeedStream(self.seed, _mix64(self.stream_id ^ _mix64(int(index))))

    def u64(self, n: int) -> np.ndarray:
        out = np.empty(int(n), dtype=np.uint64)
        _kernels.fill_u64(self._s, out)
        return out

    def next_u64(self) -> int:
        return int(self.u64(1)[0])

    def uniforms(self, n: int) -> np.ndarray:
        out = np.empty(int(n), dtype=np.float64)
        _kernels.fill_uniform(self._s, out)
        return out

    def uniform(self) -> float:
        return float(self.uniforms(1)[0])

    def gaussians(self, n: int) -> np.ndarray:
        out = np.empty(int(n), dtype=np.float64)
        _kernels.fill_gaussian(self._s, self._pending, out)
        return out

    def gaussian(self) -> float:
        return float(self.gaussians(1)[0])

    def permutation(self, n: int) -> np.ndarray:
        idx = np.arange(int(n), dtype=np.int64)
        if n > 1:
            _kernels.shuffle_in_place(self._s, idx)
        return idx

    def randint_below(self, n: int) -> int:
        """Small-range helper for generator jitter; floor(u * n), n >= 1."""
        if n < 1:
            raise ValueError("n must be >= 1")
        return min(int(self.uniform() * n), n - 1)


def gaussian_draw(stream: SeedStream) -> float:
    """One standard-normal draw from the stream."""
    return stream.gaussian()

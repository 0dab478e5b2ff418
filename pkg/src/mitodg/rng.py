"""Splittable deterministic random streams.

Every stochastic operation in the toolkit draws from a :class:`RandomStream`
identified by a 64-bit seed plus a derivation path.  Child streams are
derived by hashing, never by drawing, so the tree of streams is fixed by
(seed, path) alone and a parallel consumer can hand a private stream to each
work item without caring about scheduling order.

Generator: Philox 4x64 (10 rounds) keyed with the first 128 bits of
SHA-256 over an injective encoding of (seed, path).  All scalar and array
draws are defined on top of the raw 64-bit output stream; the exact
mappings live in ``docs/determinism.md`` and are frozen for the life of the
package.
"""

from __future__ import annotations

import hashlib
import struct

import numpy as np

__all__ = ["RandomStream", "derive_stream"]

_DOMAIN = b"mitodg.rng.v1"
_U64 = 1 << 64
# uniform doubles take the top 53 bits of a u64: exact IEEE arithmetic,
# identical on every platform
_INV53 = 1.0 / (1 << 53)


def _philox_key(seed: int, path: tuple[int, ...]) -> np.ndarray:
    msg = _DOMAIN + struct.pack("<Q", seed % _U64)
    for p in path:
        msg += struct.pack("<Q", p % _U64)
    digest = hashlib.sha256(msg).digest()
    return np.frombuffer(digest[:16], dtype=np.uint64)


class RandomStream:
    """A deterministic draw source addressed by (seed, derivation path).

    The identity (seed, path) is immutable; drawing advances an internal
    Philox counter.  Two streams with the same identity always produce the
    same draw sequence, and streams with different identities are
    statistically independent.
    """

    __slots__ = ("seed", "path", "_bitgen")

    def __init__(self, seed: int, path: tuple[int, ...] = ()):
        self.seed = seed % _U64
        self.path = tuple(p % _U64 for p in path)
        self._bitgen = np.random.Philox(key=_philox_key(self.seed, self.path))

    def __repr__(self) -> str:
        return f"RandomStream(seed={self.seed}, path={self.path})"

    def derive(self, key: int) -> "RandomStream":
        """Pure: returns the child stream at ``path + (key,)``, fresh state."""
        return RandomStream(self.seed, self.path + (key,))

    # -- raw draws ---------------------------------------------------------

    def u64(self, size: int | None = None):
        """Raw 64-bit words from the Philox stream."""
        if size is None:
            return int(self._bitgen.random_raw())
        return self._bitgen.random_raw(size)

    # -- scalar/array mappings (documented in docs/determinism.md) ---------

    def uniform(self, low: float = 0.0, high: float = 1.0, size=None):
        """U[low, high) via the top 53 bits of each raw word."""
        if size is None:
            u = (self.u64() >> 11) * _INV53
            return low + (high - low) * u
        raw = np.asarray(self.u64(int(np.prod(size)) if not np.isscalar(size) else size))
        u = (raw >> np.uint64(11)).astype(np.float64) * _INV53
        return (low + (high - low) * u).reshape(size)

    def randint(self, n: int) -> int:
        """Uniform integer in [0, n) by masked rejection (no modulo bias)."""
        if n <= 0:
            raise ValueError("randint requires n >= 1")
        mask = (1 << int(n - 1).bit_length()) - 1 if n > 1 else 0
        while True:
            v = self.u64() & mask
            if v < n:
                return v

    def normal(self, sigma: float = 1.0, size=None):
        """N(0, sigma^2) via Box-Muller over uniform pairs.

        Uses numpy's log/cos/sin ufuncs; bit-stable for a fixed numpy build.
        """
        if size is None:
            return float(self.normal(sigma, size=1)[0])
        count = int(np.prod(size)) if not np.isscalar(size) else int(size)
        pairs = (count + 1) // 2
        u1 = np.clip(self.uniform(size=pairs), _INV53, None)
        u2 = self.uniform(size=pairs)
        r = np.sqrt(-2.0 * np.log(u1))
        theta = 2.0 * np.pi * u2
        out = np.concatenate([r * np.cos(theta), r * np.sin(theta)])[:count]
        return (sigma * out).reshape(size)

    def shuffle(self, items: list) -> list:
        """Fisher-Yates over a copy; the input is left untouched."""
        out = list(items)
        for i in range(len(out) - 1, 0, -1):
            j = self.randint(i + 1)
            out[i], out[j] = out[j], out[i]
        return out

    def choice(self, items):
        if len(items) == 0:
            raise ValueError("choice from empty sequence")
        return items[self.randint(len(items))]


def derive_stream(parent: RandomStream, key: int) -> RandomStream:
    """Functional alias for :meth:`RandomStream.derive`."""
    return parent.derive(key)

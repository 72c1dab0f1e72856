"""Counter-based random streams keyed by (purpose, time index, path index).

Draws come from a numpy-vectorised Philox4x32-10 block cipher.  The 64-bit
cipher key is derived from the master seed, a purpose tag and a time index;
the 128-bit counter holds the path index and the position within that
path's stream.  Any draw is therefore a pure function of
``(seed, purpose, t, i, position)`` and can be generated in any order.
"""

from __future__ import annotations

import hashlib
import struct
from dataclasses import dataclass

import numpy as np
from scipy.special import ndtri

_M0 = np.uint64(0xD2511F53)
_M1 = np.uint64(0xCD9E8D57)
_W0 = 0x9E3779B9
_W1 = 0xBB67AE85
_MASK32 = np.uint64(0xFFFFFFFF)
_SHIFT32 = np.uint64(32)


def philox4x32(counter, key, rounds: int = 10):
    """Philox4x32 block function.

    Parameters
    ----------
    counter : array_like of uint32, shape (..., 4)
    key : pair of ints (k0, k1), each < 2**32

    Returns
    -------
    ndarray of uint32, shape (..., 4)
    """
    c = np.asarray(counter, dtype=np.uint64)
    c0, c1, c2, c3 = c[..., 0], c[..., 1], c[..., 2], c[..., 3]
    k0, k1 = int(key[0]) & 0xFFFFFFFF, int(key[1]) & 0xFFFFFFFF
    for r in range(rounds):
        if r:
            k0 = (k0 + _W0) & 0xFFFFFFFF
            k1 = (k1 + _W1) & 0xFFFFFFFF
        p0 = _M0 * c0
        p1 = _M1 * c2
        hi0, lo0 = p0 >> _SHIFT32, p0 & _MASK32
        hi1, lo1 = p1 >> _SHIFT32, p1 & _MASK32
        c0 = hi1 ^ c1 ^ np.uint64(k0)
        c1 = lo1
        c2 = hi0 ^ c3 ^ np.uint64(k1)
        c3 = lo0
    return np.stack([c0, c1, c2, c3], axis=-1).astype(np.uint32)


def _hash64(*parts) -> int:
    h = hashlib.blake2b(digest_size=8)
    for p in parts:
        if isinstance(p, str):
            h.update(b"s" + p.encode() + b"\0")
        else:
            h.update(b"i" + struct.pack("<Q", int(p) % 2**64))
    return struct.unpack("<Q", h.digest())[0]


@dataclass(frozen=True)
class SeedPlan:
    """Master seed from which every random stream of a run is derived.

    A stream is addressed by ``(purpose, t, i)``; distinct addresses give
    independent streams and the same address always reproduces the same
    draws.
    """

    seed: int

    def __post_init__(self):
        if not 0 <= int(self.seed) < 2**64:
            raise ValueError(f"seed must fit in 64 unsigned bits, got {self.seed}")

    def derive(self, tag: str, index: int = 0) -> "SeedPlan":
        """Child plan, e.g. one per replicate."""
        return SeedPlan(_hash64(self.seed, "derive", tag, index))

    def key(self, purpose: str, t: int) -> tuple[int, int]:
        h = _hash64(self.seed, purpose, t)
        return h & 0xFFFFFFFF, h >> 32

    def uniforms(self, purpose: str, t: int, paths, count: int) -> np.ndarray:
        """Uniform draws in the open interval (0, 1).

        Returns an array of shape ``(len(paths), count)``; row ``r`` holds
        the first ``count`` values of stream ``(purpose, t, paths[r])``.
        Each value carries 53 random bits.
        """
        paths = np.asarray(paths, dtype=np.int64).reshape(-1)
        if count <= 0:
            return np.empty((paths.size, 0))
        if paths.size and paths.min() < 0:
            raise ValueError("path indices must be nonnegative")
        blocks = (count + 1) // 2
        ctr = np.zeros((paths.size, blocks, 4), dtype=np.uint64)
        ctr[..., 0] = np.arange(blocks, dtype=np.uint64)[None, :]
        p = paths.astype(np.uint64)
        ctr[..., 1] = (p & _MASK32)[:, None]
        ctr[..., 2] = (p >> _SHIFT32)[:, None]
        words = philox4x32(ctr, self.key(purpose, t)).astype(np.uint64)
        # two 53-bit doubles per block, from word pairs (0, 1) and (2, 3)
        a = words[..., 0::2] >> np.uint64(5)
        b = words[..., 1::2] >> np.uint64(6)
        k = (a * np.uint64(67108864) + b).astype(np.float64)
        u = (k + 0.5) / 9007199254740992.0
        return u.reshape(paths.size, 2 * blocks)[:, :count]

    def normals(self, purpose: str, t: int, paths, count: int) -> np.ndarray:
        """Standard normal draws by inverse-CDF transform of :meth:`uniforms`."""
        return ndtri(self.uniforms(purpose, t, paths, count))

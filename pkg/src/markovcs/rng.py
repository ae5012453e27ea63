"""Counter-based random numbers (Philox4x32-10).

Every random quantity in the package is a pure function of
``(seed, stream, index)``: the 64-bit seed is the Philox key, and the
128-bit counter holds the step index in its low 64 bits and a stream id
in its high 64 bits. Each counter yields four 32-bit words, packed into
two 64-bit words ``w0 = x0 | x1 << 32`` and ``w1 = x2 | x3 << 32``.
Uniform doubles are ``(w0 >> 11) * 2**-53``.

Because values are addressed rather than drawn from a mutable state, a
trajectory of length ``m`` is exactly the prefix of any longer one with
the same seed, and any implementation of Philox4x32-10 (Salmon et al.,
SC'11) reproduces the streams bit for bit.
"""

import hashlib

import numpy as np

from ._validation import check_seed

__all__ = [
    "philox4x32",
    "RandomStream",
    "derive_seed",
    "STREAM_IID",
    "STREAM_JUMP",
    "STREAM_PROPOSE",
    "STREAM_ACCEPT",
    "STREAM_PERSIST",
    "STREAM_VALUES",
]

_M0 = np.uint64(0xD2511F53)
_M1 = np.uint64(0xCD9E8D57)
_W0 = 0x9E3779B9
_W1 = 0xBB67AE85
_MASK32 = np.uint64(0xFFFFFFFF)
_SHIFT32 = np.uint64(32)
_ROUNDS = 10

# Stream ids; fixed so files produced by different versions agree.
STREAM_IID = 1
STREAM_JUMP = 2
STREAM_PROPOSE = 3
STREAM_ACCEPT = 4
STREAM_PERSIST = 5
STREAM_VALUES = 6


def philox4x32(counter, key):
    """Apply the 10-round Philox4x32 bijection.

    Parameters
    ----------
    counter : array_like of shape (N, 4)
        32-bit counter words (stored in any integer dtype).
    key : tuple of two ints
        32-bit key words ``(k0, k1)``.

    Returns
    -------
    ndarray of shape (N, 4), dtype uint32
    """
    c = np.asarray(counter, dtype=np.uint64) & _MASK32
    c0, c1, c2, c3 = (c[:, i].copy() for i in range(4))
    k0, k1 = int(key[0]) & 0xFFFFFFFF, int(key[1]) & 0xFFFFFFFF
    for r in range(_ROUNDS):
        if r:
            k0 = (k0 + _W0) & 0xFFFFFFFF
            k1 = (k1 + _W1) & 0xFFFFFFFF
        p0 = _M0 * c0
        p1 = _M1 * c2
        hi0, lo0 = p0 >> _SHIFT32, p0 & _MASK32
        hi1, lo1 = p1 >> _SHIFT32, p1 & _MASK32
        c0, c1, c2, c3 = hi1 ^ c1 ^ np.uint64(k0), lo1, hi0 ^ c3 ^ np.uint64(k1), lo0
    return np.stack([c0, c1, c2, c3], axis=1).astype(np.uint32)


def derive_seed(master_seed, *path):
    """Hash a master seed and a task path into a 64-bit seed.

    >>> derive_seed(7, "experiment", "alpha=0.1", "rep=3") == derive_seed(7, "experiment", "alpha=0.1", "rep=3")
    True
    """
    master_seed = check_seed(master_seed)
    text = "/".join([str(master_seed), *map(str, path)]).encode("utf-8")
    return int.from_bytes(hashlib.blake2b(text, digest_size=8).digest(), "little")


class RandomStream:
    """Random-access view of one Philox stream.

    Parameters
    ----------
    seed : int
        64-bit Philox key.
    stream : int
        Stream id placed in the high 64 bits of the counter.
    """

    def __init__(self, seed, stream):
        self.seed = check_seed(seed)
        self.stream = int(stream)
        self._key = (self.seed & 0xFFFFFFFF, self.seed >> 32)

    def __repr__(self):
        return f"RandomStream(seed={self.seed}, stream={self.stream})"

    def words(self, start, count):
        """Return the 64-bit word pairs for indices ``start .. start+count-1``.

        Returns an array of shape (count, 2), dtype uint64.
        """
        idx = np.arange(start, start + count, dtype=np.uint64)
        ctr = np.empty((count, 4), dtype=np.uint64)
        ctr[:, 0] = idx & _MASK32
        ctr[:, 1] = idx >> _SHIFT32
        ctr[:, 2] = self.stream & 0xFFFFFFFF
        ctr[:, 3] = (self.stream >> 32) & 0xFFFFFFFF
        x = philox4x32(ctr, self._key).astype(np.uint64)
        out = np.empty((count, 2), dtype=np.uint64)
        out[:, 0] = x[:, 0] | (x[:, 1] << _SHIFT32)
        out[:, 1] = x[:, 2] | (x[:, 3] << _SHIFT32)
        return out

    def uniform(self, start, count, word=0):
        """Uniform doubles in [0, 1) at indices ``start .. start+count-1``."""
        w = self.words(start, count)[:, word]
        return (w >> np.uint64(11)).astype(np.float64) * 2.0**-53

    def normal(self, start, count):
        """Standard normals by Box-Muller on the two words of each index."""
        w = self.words(start, count)
        u1 = ((w[:, 0] >> np.uint64(11)).astype(np.float64) + 1.0) * 2.0**-53
        u2 = (w[:, 1] >> np.uint64(11)).astype(np.float64) * 2.0**-53
        return np.sqrt(-2.0 * np.log(u1)) * np.cos(2.0 * np.pi * u2)

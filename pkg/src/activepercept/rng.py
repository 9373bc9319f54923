"""Counter-based random streams.

Every stream is identified by a 64-bit key and draw ``n`` of the stream is
``mix64(key + (n + 1) * GOLDEN)`` (SplitMix64 indexed by counter). Because a
draw is a pure function of ``(key, n)``, whole batches can be generated with
vectorized numpy arithmetic, chunked arbitrarily, and still reproduce the
exact numbers the sequential :class:`CounterStream` would give.
"""

import numpy as np

_MASK = (1 << 64) - 1
GOLDEN = np.uint64(0x9E3779B97F4A7C15)
_M1 = np.uint64(0xBF58476D1CE4E5B9)
_M2 = np.uint64(0x94D049BB133111EB)
_INV53 = 2.0 ** -53


def mix64(z):
    """SplitMix64 finalizer applied elementwise to a uint64 array."""
    z = np.asarray(z, dtype=np.uint64)
    with np.errstate(over="ignore"):
        z = (z ^ (z >> np.uint64(30))) * _M1
        z = (z ^ (z >> np.uint64(27))) * _M2
        return z ^ (z >> np.uint64(31))


def derive_key(seed, *path):
    """Key of the substream reached from ``seed`` by following ``path``.

    ``path`` entries may be ints or int arrays (broadcast together), so
    ``derive_key(seed, np.arange(M))`` yields the M trajectory keys at once.
    """
    with np.errstate(over="ignore"):
        key = mix64(np.uint64(int(seed) & _MASK) + GOLDEN)
        for part in path:
            if isinstance(part, (int, np.integer)):
                part = np.uint64(int(part) & _MASK)
            else:
                part = np.asarray(part).astype(np.uint64)
            key = mix64(key ^ mix64(part + GOLDEN))
    return key


def uniforms(keys, counter):
    """Draw number ``counter`` of every stream in ``keys`` as floats in [0, 1)."""
    with np.errstate(over="ignore"):
        c = np.uint64(int(counter) + 1)
        bits = mix64(np.asarray(keys, dtype=np.uint64) + c * GOLDEN)
    return (bits >> np.uint64(11)).astype(np.float64) * _INV53


class CounterStream:
    """Sequential view of one counter-based stream.

    Exposes ``random()`` so it can stand in for ``numpy.random.Generator``
    wherever only scalar uniforms are needed.
    """

    def __init__(self, key, counter=0):
        self.key = np.uint64(key)
        self.counter = int(counter)

    @classmethod
    def from_seed(cls, seed, *path):
        return cls(derive_key(seed, *path))

    def random(self):
        u = float(uniforms(self.key, self.counter))
        self.counter += 1
        return u

    def skip(self, n=1):
        self.counter += int(n)

    def __repr__(self):
        return f"CounterStream(key={int(self.key):#018x}, counter={self.counter})"


def categorical(cdf, u):
    """Inverse-CDF sampling shared by the scalar and the batched paths.

    ``cdf`` has categories on its last axis; ``u`` is uniform in [0, 1) with
    the leading shape of ``cdf``. Scaling ``u`` by the final CDF value keeps
    zero-probability categories unreachable even when the CDF ends at 1 - ulp.
    """
    cdf = np.asarray(cdf)
    u = np.asarray(u) * cdf[..., -1]
    return np.sum(cdf <= u[..., None], axis=-1)

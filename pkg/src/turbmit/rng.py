"""Portable seeded random numbers.

``Rng`` is SplitMix64 (Steele, Lea & Flood 2014): the k-th 64-bit output of
seed ``s`` is ``mix(s + k * 0x9E3779B97F4A7C15)`` for k = 1, 2, ...  Because
the state is a plain counter the stream is evaluated in vectorised numpy
``uint64`` arithmetic and is bit-identical on every platform.

Derived draws:

* uniform double: ``(x >> 11) * 2**-53`` in ``[0, 1)``
* standard normal: Box-Muller on pairs of outputs ``(a, b)`` with
  ``u1 = ((a >> 11) + 1) * 2**-53`` and ``u2 = (b >> 11) * 2**-53``;
  the pair yields ``r cos(2 pi u2)`` then ``r sin(2 pi u2)``
* child streams (:meth:`Rng.spawn`): each child is seeded with one raw
  output of the parent
"""

import numpy as np

_GAMMA = np.uint64(0x9E3779B97F4A7C15)
_M1 = np.uint64(0xBF58476D1CE4E5B9)
_M2 = np.uint64(0x94D049BB133111EB)
_MASK64 = (1 << 64) - 1
_TWO_M53 = 2.0**-53


def _mix(z):
    z = (z ^ (z >> np.uint64(30))) * _M1
    z = (z ^ (z >> np.uint64(27))) * _M2
    return z ^ (z >> np.uint64(31))


class Rng:
    def __init__(self, seed):
        self.seed = int(seed) & _MASK64
        self._counter = 0

    def __repr__(self):
        return f"Rng(seed={self.seed}, counter={self._counter})"

    def raw(self, n):
        """Next ``n`` 64-bit outputs as a ``uint64`` array."""
        k = np.arange(self._counter + 1, self._counter + 1 + n, dtype=np.uint64)
        self._counter += n
        with np.errstate(over="ignore"):
            return _mix(np.uint64(self.seed) + k * _GAMMA)

    def random(self, size=None):
        n = 1 if size is None else int(np.prod(size))
        u = (self.raw(n) >> np.uint64(11)).astype(np.float64) * _TWO_M53
        return float(u[0]) if size is None else u.reshape(size)

    def uniform(self, low, high, size=None):
        u = self.random(size)
        return low + (high - low) * u

    def normal(self, size):
        n = int(np.prod(size))
        pairs = (n + 1) // 2
        bits = self.raw(2 * pairs) >> np.uint64(11)
        u1 = (bits[0::2].astype(np.float64) + 1.0) * _TWO_M53
        u2 = bits[1::2].astype(np.float64) * _TWO_M53
        r = np.sqrt(-2.0 * np.log(u1))
        z = np.empty(2 * pairs)
        z[0::2] = r * np.cos(2.0 * np.pi * u2)
        z[1::2] = r * np.sin(2.0 * np.pi * u2)
        return z[:n].reshape(size)

    def integers_below(self, n):
        """Integer uniform on ``0 .. n-1``."""
        return min(int(self.random() * n), n - 1)

    def choice(self, options):
        options = list(options)
        return options[self.integers_below(len(options))]

    def spawn(self, n):
        """``n`` independent child generators seeded from this stream."""
        return [Rng(int(s)) for s in self.raw(n)]

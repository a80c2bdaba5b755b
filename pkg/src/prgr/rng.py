"""Deterministic, platform-independent random number generation.

Every random decision in this package flows from :class:`Pcg32`, an
implementation of the PCG-XSH-RR generator (64-bit state, 32-bit output,
O'Neill 2014).  The generator is fully specified here so that results are
reproducible bit-for-bit across platforms and across the pure-Python and
compiled code paths:

* ``state' = state * 6364136223846793005 + inc   (mod 2**64)``
* output  = 32-bit xorshift-rotate of the previous state
* ``uniform()`` maps the 32-bit output to ``[0, 1)`` as ``u32 * 2**-32``

Independent substreams are derived with :meth:`Pcg32.spawn`, which hashes
the parent's immutable seed with the child key through SplitMix64.  Spawning
never consumes draws, so parallel workers can derive their generators in any
order and still see identical streams.
"""

from __future__ import annotations

MASK64 = 0xFFFFFFFFFFFFFFFF
PCG_MULT = 6364136223846793005
GOLDEN = 0x9E3779B97F4A7C15


def splitmix64(x: int) -> int:
    """One SplitMix64 step; the standard 64-bit avalanche mix."""
    x = (x + GOLDEN) & MASK64
    z = x
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & MASK64
    return z ^ (z >> 31)


class Pcg32:
    """Seedable PCG-XSH-RR stream with deterministic child spawning.

    Two instances constructed with equal ``seed`` produce identical draw
    sequences on every platform.
    """

    __slots__ = ("seed", "_state", "_inc")

    def __init__(self, seed: int):
        self.seed = seed & MASK64
        # standard pcg32 srandom: inc from the derived stream id, two warm-up steps
        inc = splitmix64(self.seed ^ 0xDA3E39CB94B95BDB)
        self._inc = ((inc << 1) | 1) & MASK64
        self._state = 0
        self._next_u32()
        self._state = (self._state + self.seed) & MASK64
        self._next_u32()

    def _next_u32(self) -> int:
        old = self._state
        self._state = (old * PCG_MULT + self._inc) & MASK64
        xorshifted = (((old >> 18) ^ old) >> 27) & 0xFFFFFFFF
        rot = old >> 59
        return ((xorshifted >> rot) | (xorshifted << ((-rot) & 31))) & 0xFFFFFFFF

    def uniform(self) -> float:
        """Uniform float in [0, 1) with 32-bit resolution."""
        return self._next_u32() * 2.3283064365386963e-10  # 2**-32

    def uniform_int(self, n: int) -> int:
        """Uniform integer in [0, n) via the multiply-shift bound map."""
        if n <= 0:
            raise ValueError("n must be positive")
        return (self._next_u32() * n) >> 32

    def categorical(self, weights) -> int:
        """Draw an index proportional to non-negative ``weights``.

        The cumulative walk uses one ``uniform()`` draw; total weight must be
        positive.
        """
        total = 0.0
        for w in weights:
            total += w
        if total <= 0.0:
            raise ValueError("total weight must be positive")
        target = self.uniform() * total
        run = 0.0
        last = 0
        for i, w in enumerate(weights):
            if w > 0.0:
                run += w
                last = i
                if target < run:
                    return i
        return last

    def spawn(self, key: int) -> "Pcg32":
        """Child generator determined by (parent seed, key) only."""
        child_seed = splitmix64(self.seed ^ splitmix64(key & MASK64))
        return Pcg32(child_seed)

    def state_array(self):
        """Current (state, inc) as a uint64 array for the compiled kernels.

        The kernels advance the array in place; the same PCG step produces
        the same draws there as :meth:`uniform` does here.
        """
        import numpy as np

        return np.array([self._state, self._inc], dtype=np.uint64)

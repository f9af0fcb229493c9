"""Counter-based random streams and the shared simulation clock.

All randomness in the package derives from a single 64-bit master seed via
a splitmix64-style counter generator.  Because draws are indexed rather than
produced from mutable state, many sample paths can read the same stream
without materializing it, and any sub-stream (clock, event selection,
parameter sampling) can be reproduced in isolation.

The bit-level algorithm here is mirrored inside the compiled simulation
kernels; ``tests/test_clock.py`` pins the two implementations to each other.
"""

from __future__ import annotations

from dataclasses import dataclass
from math import log

_MASK64 = 0xFFFFFFFFFFFFFFFF
_GOLDEN = 0x9E3779B97F4A7C15
# Sub-stream tags for the two clock sequences.
_TAG_INTERARRIVAL = 0x1D872B41
_TAG_SELECTION = 0x2545F491

__all__ = [
    "mix64",
    "split_seed",
    "uniform_draw",
    "exponential_draw",
    "ClockStream",
]


def mix64(value: int) -> int:
    """64-bit finalizer scrambling a counter into a pseudorandom word."""
    z = value & _MASK64
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK64
    return z ^ (z >> 31)


def split_seed(seed: int, tag: int) -> int:
    """Derive an independent sub-stream key from ``seed``.

    Used for everything that needs its own stream: the V/U clock sequences,
    per-run seeds in sweeps, per-batch seeds in the random search.
    """
    return mix64(mix64((seed + _GOLDEN) & _MASK64) ^ mix64((tag * _GOLDEN + 0x3C6EF372FE94F82A) & _MASK64))


def _word(key: int, index: int) -> int:
    return mix64((key + (index + 1) * _GOLDEN) & _MASK64)


def uniform_draw(key: int, index: int) -> float:
    """The ``index``-th uniform(0, 1) draw of stream ``key`` (53-bit)."""
    return (_word(key, index) >> 11) * 2.0**-53


def exponential_draw(key: int, index: int) -> float:
    """The ``index``-th unit-rate exponential draw of stream ``key``.

    The underlying uniform is offset by half an ulp so the result is
    strictly positive.
    """
    u = ((_word(key, index) >> 11) + 0.5) * 2.0**-53
    return -log(u)


@dataclass(frozen=True)
class ClockStream:
    """Shared clock for concurrent path construction.

    Exposes two indexed sequences: unit-rate exponential inter-event draws
    ``v(k)`` and uniform(0, 1) selection draws ``u(k)``.  Every path built
    from the same seed reads the identical sequences.
    """

    seed: int

    @property
    def _vkey(self) -> int:
        return split_seed(self.seed, _TAG_INTERARRIVAL)

    @property
    def _ukey(self) -> int:
        return split_seed(self.seed, _TAG_SELECTION)

    def v(self, k: int) -> float:
        """Unit-rate exponential inter-event draw number ``k`` (k >= 0)."""
        return exponential_draw(self._vkey, k)

    def u(self, k: int) -> float:
        """Uniform event-selection draw number ``k`` (k >= 0)."""
        return uniform_draw(self._ukey, k)

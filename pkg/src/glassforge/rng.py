"""Counter-based random numbers for reproducible parallel rendering.

Per-sample values are pure functions of (seed, counter); results therefore do
not depend on evaluation order, chunking, or worker count.
"""

from __future__ import annotations

import numpy as np

_GOLDEN = 0x9E3779B97F4A7C15
_MASK = (1 << 64) - 1


def splitmix64(*parts: int) -> int:
    """Hash a tuple of integers into a 64-bit state (pure Python, exact)."""
    state = 0
    for p in parts:
        state = (state + (p & _MASK) + _GOLDEN) & _MASK
        z = state
        z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK
        z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK
        state = z ^ (z >> 31)
    return state


def _mix64(x: np.ndarray) -> np.ndarray:
    x = x + np.uint64(_GOLDEN)
    x = (x ^ (x >> np.uint64(30))) * np.uint64(0xBF58476D1CE4E5B9)
    x = (x ^ (x >> np.uint64(27))) * np.uint64(0x94D049BB133111EB)
    return x ^ (x >> np.uint64(31))


def counter_uniform(seed: int, counters: np.ndarray) -> np.ndarray:
    """Map (seed, counter) pairs to float64 uniforms in [0, 1)."""
    c = np.asarray(counters, dtype=np.uint64)
    h = _mix64(c ^ np.uint64(splitmix64(seed)))
    return h.astype(np.float64) * 2.0**-64

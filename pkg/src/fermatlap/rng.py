"""Counter-based random streams.

Every random draw in the package goes through `stream(seed, index)`. The
generator is Philox4x64 keyed by SeedSequence([seed, index]), so streams with
distinct indices are independent and any (seed, index) pair can be rebuilt on
its own, in any order, in any process.
"""
import numpy as np

MASK64 = (1 << 64) - 1


def stream(seed: int, index: int = 0) -> np.random.Generator:
    ss = np.random.SeedSequence([int(seed) & MASK64, int(index) & MASK64])
    return np.random.Generator(np.random.Philox(ss))


def spawn(seed: int, count: int, offset: int = 0):
    """List of `count` consecutive streams starting at stream index `offset`."""
    return [stream(seed, offset + i) for i in range(count)]

"""
Counter-based seed derivation.

Every random stream in the simulator is keyed by the master seed plus a tuple of
counters (trajectory index, channel index, optimizer point index). Streams never
depend on the order in which work items are scheduled, so results are identical
for any thread count.
"""

import numpy as np

__all__ = ["derive_seed", "get_rng"]

SEED_MASK = (1 << 64) - 1


def derive_seed(master_seed: int, *counters: int) -> int:
    """
    Derive a 64-bit child seed from a master seed and a counter tuple.

    :param master_seed: The 64-bit master seed.
    :param counters: Non-negative counters identifying the child stream.
    :return: A 64-bit integer seed, stable across platforms and numpy versions.
    """
    sequence = np.random.SeedSequence(
        entropy=int(master_seed) & SEED_MASK, spawn_key=tuple(int(c) for c in counters)
    )
    low, high = sequence.generate_state(2, dtype=np.uint32)
    return (int(high) << 32) | int(low)


def get_rng(seed: int) -> np.random.Generator:
    """
    Get a numpy random generator for a derived seed.

    :param seed: A seed from derive_seed() or a user-supplied master seed.
    :return: numpy Generator instance owned by the caller.
    """
    return np.random.default_rng(int(seed) & SEED_MASK)

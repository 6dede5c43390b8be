"""Reproducible random number streams derived from a master seed.

All algorithms take an explicit ``numpy.random.Generator``; this module
derives independent generators for replicates, commands and algorithm
phases so that outputs are a deterministic function of (seed, config).
"""

import numpy as np


def derive_rng(seed: int, *keys: int) -> np.random.Generator:
    """Generator for the substream identified by ``(seed, *keys)``.

    Distinct key paths yield statistically independent streams; the same
    path always yields the same stream.
    """
    return np.random.default_rng(np.random.SeedSequence([int(seed), *map(int, keys)]))

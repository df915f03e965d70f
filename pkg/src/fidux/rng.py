"""Reproducible randomness.

All stochastic code in this package draws from Philox, a counter-based
64-bit generator, through named substreams: a user seed plus a tuple of
integers identifying the consumer (for example ``(scenario, replication,
stage)``).  Streams with distinct paths are statistically independent and
each (seed, path) pair always yields the same sequence, no matter how the
work is scheduled, which is what makes multi-process simulation studies
reduce to the same numbers as serial runs.

The generator family is pinned to Philox; the reproducibility contract is
"same seed, same package version => same draws".
"""

from __future__ import annotations

import numpy as np


def substream(seed: int, *path: int) -> np.random.Generator:
    """Return the Philox generator addressed by ``(seed, *path)``."""
    ss = np.random.SeedSequence(int(seed), spawn_key=tuple(int(q) for q in path))
    return np.random.Generator(np.random.Philox(ss))


def positive_uniform(rng: np.random.Generator) -> float:
    """A Uniform(0,1) variate that is never exactly zero."""
    u = rng.random()
    while u == 0.0:
        u = rng.random()
    return u

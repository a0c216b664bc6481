"""Seeded random streams.

Every stream is a Philox (counter-based) generator keyed by a tuple of
non-negative integers, e.g. ``(seed, replication, chain, purpose)``.  Streams
with different keys are statistically independent, and a stream's output does
not depend on how many draws other streams have made, which is what keeps
chain extension and parallel replications reproducible.
"""

import numpy as np

PROPOSAL, ACCEPT, START = 0, 1, 2


def as_key(seed):
    if isinstance(seed, (tuple, list)):
        key = tuple(int(s) for s in seed)
    else:
        key = (int(seed),)
    if any(k < 0 for k in key):
        raise ValueError(f"seed components must be non-negative, got {key}")
    return key


def stream(seed, *path):
    """Generator for the key ``seed + path``."""
    key = as_key(seed) + tuple(int(p) for p in path)
    # SeedSequence ignores trailing zeros, so lead with the length to keep (1, 0) and (1, 0, 0) apart
    return np.random.Generator(np.random.Philox(np.random.SeedSequence([len(key), *key])))

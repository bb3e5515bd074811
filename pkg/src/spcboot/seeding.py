"""Deterministic derivation of independent random streams.

Every stochastic routine in the package takes either an explicit
``numpy.random.Generator`` or a master seed from which per-replicate
streams are derived.  A replicate's stream depends only on the master
seed and the replicate's own key, never on scheduling or worker count,
so results are bit-reproducible under any degree of chunking.
"""

from __future__ import annotations

import numpy as np

_MASK64 = (1 << 64) - 1


def substream(master_seed: int, *key: int) -> np.random.Generator:
    """Return the generator keyed by ``(master_seed, *key)``."""
    entropy = [int(master_seed) & _MASK64] + [int(k) & _MASK64 for k in key]
    return np.random.default_rng(np.random.SeedSequence(entropy))


def derive_seed(master_seed: int, *key: int) -> int:
    """Collapse ``(master_seed, *key)`` into a fresh 64-bit master seed."""
    entropy = [int(master_seed) & _MASK64] + [int(k) & _MASK64 for k in key]
    state = np.random.SeedSequence(entropy).generate_state(2, dtype=np.uint32)
    return (int(state[0]) << 32) | int(state[1])

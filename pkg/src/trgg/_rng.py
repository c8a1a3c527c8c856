"""Seeded, splittable random streams.

Every replica of every experiment draws from its own stream, derived from
the master seed and the replica's coordinates. Results are therefore the
same whether replicas run serially or across any number of workers.
"""
from __future__ import annotations

import numpy as np

MASK64 = (1 << 64) - 1


def make_rng(seed) -> np.random.Generator:
    """Return a PCG64 generator; passes existing generators through."""
    if isinstance(seed, np.random.Generator):
        return seed
    if seed is None:
        raise ValueError("a seed is required for reproducible sampling")
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(int(seed) & MASK64)))


def replica_rng(master_seed: int, replica: int, *keys: int) -> np.random.Generator:
    """Stream for ``replica`` under ``master_seed``.

    ``keys`` separate independent experiment cells (e.g. the index of the
    node count) so that cells do not share streams.
    """
    if replica < 0:
        raise ValueError("replica index must be nonnegative")
    ss = np.random.SeedSequence(int(master_seed) & MASK64,
                                spawn_key=tuple(int(k) for k in keys) + (int(replica),))
    return np.random.Generator(np.random.PCG64(ss))

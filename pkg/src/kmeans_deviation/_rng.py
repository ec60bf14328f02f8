"""Seeding machinery: one fixed counter-based generator, hashed substreams.

All randomness in the package flows through Philox (a counter-based 64-bit
generator) keyed via ``numpy.random.SeedSequence``. Substreams are derived
by hashing ``(entropy, path)`` where ``path`` is a tuple of small integers,
so results never depend on execution order or worker count: any cell or
candidate stream can be reconstructed from the master seed and its path.

Draw-order conventions (which distribution methods consume the stream, in
what order) are documented on each sampler in :mod:`.distributions`.
"""
from __future__ import annotations

import numpy as np

from .errors import PreconditionError

# Fixed purpose tags used as the first spawn_key component. New tags must be
# appended, never renumbered, or derived streams change.
SAMPLE = 1
CANDIDATE_IID = 2
CANDIDATE_KMPP = 3
CANDIDATE_LLOYD = 4
CANDIDATE_PERTURB = 5
REFERENCE = 6
CELL = 7
AUX = 8

_UINT64_MAX = 2**64 - 1


def check_seed(seed: int) -> int:
    """Validate a 64-bit unsigned master seed."""
    seed = int(seed)
    if not 0 <= seed <= _UINT64_MAX:
        raise PreconditionError(f"seed must be a 64-bit unsigned integer, got {seed}")
    return seed


def generator_for(seed: int, *path: int) -> np.random.Generator:
    """Philox generator for ``seed`` hashed with an optional integer path."""
    seed = check_seed(seed)
    ss = np.random.SeedSequence(entropy=seed, spawn_key=tuple(int(p) for p in path))
    return np.random.Generator(np.random.Philox(ss))


def derive_seed(seed: int, *path: int) -> int:
    """Derive a reproducible 64-bit sub-seed from ``seed`` and a path."""
    seed = check_seed(seed)
    ss = np.random.SeedSequence(entropy=seed, spawn_key=tuple(int(p) for p in path))
    return int(ss.generate_state(1, np.uint64)[0])

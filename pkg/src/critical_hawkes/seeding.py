"""Replica seed derivation.

Replica ``r`` of a run with master seed ``s`` uses the 64-bit seed
``splitmix64(s + (r + 1) * 0x9E3779B97F4A7C15 mod 2^64)``; each replica then
owns an independent PCG64 stream seeded with that value.  Seeds for a prefix
of replicas never depend on the total replica count, so ensembles can be
extended without changing existing members.
"""

from __future__ import annotations

import numpy as np

_MASK = (1 << 64) - 1
_GOLDEN = 0x9E3779B97F4A7C15


def splitmix64(z: int) -> int:
    z &= _MASK
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK
    return z ^ (z >> 31)


def derive_seed(seed: int, replica: int, stream: int = 0) -> int:
    """Seed of ``replica`` under master ``seed``.

    ``stream`` separates unrelated uses of one master seed (e.g. the Hawkes
    and SDE ensembles of a verification run).
    """
    if replica < 0:
        raise ValueError("replica index must be nonnegative")
    base = splitmix64(int(seed) ^ ((stream * 0xD1B54A32D192ED03) & _MASK)) if stream else int(seed)
    return splitmix64(base + (replica + 1) * _GOLDEN)


def replica_generator(seed: int, replica: int, stream: int = 0) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(derive_seed(seed, replica, stream)))

"""
Deterministic random substreams.

Every random draw in the package comes from a generator built by `substream`,
keyed by the experiment seed, a module salt and an integer path (chain index,
iteration, gate index, ...). The salt is hashed with CRC-32 so the derivation
is stable across interpreter runs, unlike the builtin `hash`.
"""

import zlib

import numpy as np

MAX_SEED = 2**64 - 1


def _spawn_key(salt: str, index: tuple[int, ...]) -> tuple[int, ...]:
    return (zlib.crc32(salt.encode()), *(int(i) for i in index))


def substream(seed: int, salt: str, *index: int) -> np.random.Generator:
    """Return an independent generator for `(seed, salt, *index)`."""
    sequence = np.random.SeedSequence(entropy=int(seed), spawn_key=_spawn_key(salt, index))
    return np.random.Generator(np.random.PCG64(sequence))


def derive_seed(seed: int, salt: str, *index: int) -> int:
    """Fold `(seed, salt, *index)` into a new 64-bit seed."""
    sequence = np.random.SeedSequence(entropy=int(seed), spawn_key=_spawn_key(salt, index))
    lo, hi = sequence.generate_state(2, dtype=np.uint32)
    return int(lo) | (int(hi) << 32)

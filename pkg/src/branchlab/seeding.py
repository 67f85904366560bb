"""
Deterministic seed derivation.

All randomness in a run flows from one 64-bit master seed. Sub-tasks (Monte
Carlo runs, chunks, trajectories) get their own seeds from derive_seed, so
results do not depend on execution order or worker count.
"""

import hashlib

import numpy as np

SEED_BITS = 64
_MAX_SEED = 1 << SEED_BITS
_PERSON = b"branchlab-seed"


def _check(value: int, what: str) -> None:
    if not 0 <= value < _MAX_SEED:
        raise ValueError(f"{what} must be in [0, 2^64), got {value}")


def derive_seed(master: int, index: int) -> int:
    """
    Mix (master, index) into a new 64-bit seed.

    BLAKE2b over the little-endian encodings of both integers: stateless and
    identical on every platform.
    """
    _check(master, "master seed")
    _check(index, "index")
    digest = hashlib.blake2b(
        master.to_bytes(8, "little") + index.to_bytes(8, "little"),
        digest_size=8,
        person=_PERSON,
    ).digest()
    return int.from_bytes(digest, "little")


def rng_for(master: int, index: int) -> np.random.Generator:
    """A numpy Generator seeded from derive_seed(master, index)."""
    return np.random.default_rng(derive_seed(master, index))

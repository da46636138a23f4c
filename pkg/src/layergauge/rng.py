"""Reproducible random streams.

Every stream is a Philox counter-based generator keyed by a 64-bit seed; seeds
for sub-streams are derived by hashing a tuple of identifying parts, so two
distinct tuples never share a stream by construction of the hash input.
"""

import hashlib

import numpy as np

RNG_IDENTITY = f"numpy.random.Philox via SeedSequence (numpy {np.__version__}); derive_seed=blake2b-64"


def derive_seed(*parts) -> int:
    """Hash an ordered tuple of ints/strings into a 64-bit seed."""
    h = hashlib.blake2b(digest_size=8)
    for part in parts:
        if isinstance(part, (bool, np.bool_)):
            raise TypeError("bool is ambiguous as a seed part")
        if isinstance(part, (int, np.integer)):
            token = f"i{int(part)}"
        elif isinstance(part, str):
            token = f"s{len(part)}:{part}"
        else:
            raise TypeError(f"unsupported seed part {part!r}")
        h.update(token.encode("utf-8"))
        h.update(b"\x1f")
    return int.from_bytes(h.digest(), "little")


def make_rng(seed: int, *spawn_key: int) -> np.random.Generator:
    seq = np.random.SeedSequence(int(seed) & 0xFFFFFFFFFFFFFFFF, spawn_key=tuple(spawn_key))
    return np.random.Generator(np.random.Philox(seq))

"""Deterministic RNG derivation.

Every random draw in the system comes from a Generator derived here: a
SHA-256 hash of the master seed, a stream name, and optional integer indices,
folded to 64 bits.  Named streams keep independent concerns (init, noise,
data order, ...) statistically independent and individually reproducible.
"""

from __future__ import annotations

import hashlib

import numpy as np


def derive_seed(master: int, stream: str, *indices: int) -> int:
    h = hashlib.sha256()
    h.update(str(int(master)).encode())
    h.update(b"/")
    h.update(stream.encode())
    for ix in indices:
        h.update(b"/")
        h.update(str(int(ix)).encode())
    return int.from_bytes(h.digest()[:8], "little")


def rng_for(master: int, stream: str, *indices: int) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(derive_seed(master, stream, *indices)))

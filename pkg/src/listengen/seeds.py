"""Deterministic seed derivation.

Every source of randomness in the package draws from a generator seeded by
``split_seed(master, name)``: the SHA-256 digest of ``"{master}:{name}"``
truncated to 64 bits. Distinct component names give independent streams, and
any sub-run (an epoch, a sample, a window) can be reproduced from the master
seed alone.
"""

import hashlib

import numpy as np


def split_seed(master: int, name: str) -> int:
    digest = hashlib.sha256(f"{master}:{name}".encode("utf-8")).digest()
    return int.from_bytes(digest[:8], "little")


def generator(master: int, name: str) -> np.random.Generator:
    """A fresh PCG64 generator for the component `name` under `master`."""
    return np.random.Generator(np.random.PCG64(split_seed(master, name)))

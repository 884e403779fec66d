"""Reproducible random-stream derivation.

All randomness in the package flows through numpy's PCG64 generator. Streams
are derived from a root seed plus a coordinate key (for example
``(cell, replication, permutation)``) via ``SeedSequence(root, spawn_key=key)``,
so any stream can be reconstructed independently of execution order. String
coordinates are mapped to integers with CRC-32, which is stable across runs
and platforms.
"""

from __future__ import annotations

import zlib

import numpy as np


def _key_part(part) -> int:
    if isinstance(part, str):
        return zlib.crc32(part.encode("utf-8"))
    return int(part) & 0xFFFFFFFF


def seed_sequence_for(root_seed: int, *key) -> np.random.SeedSequence:
    return np.random.SeedSequence(int(root_seed), spawn_key=tuple(_key_part(p) for p in key))


def rng_for(root_seed: int, *key) -> np.random.Generator:
    """Generator for the stream identified by (root_seed, key...)."""
    return np.random.Generator(np.random.PCG64(seed_sequence_for(root_seed, *key)))


def int_seed_for(root_seed: int, *key) -> int:
    """A derived 32-bit integer seed, for APIs that take plain int seeds."""
    return int(seed_sequence_for(root_seed, *key).generate_state(1)[0])

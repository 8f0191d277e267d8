"""Seeded hash family and bit utilities shared by every sketch.

Primitives:
    mix64        -- SplitMix64-style avalanche finalizer (scalar ints)
    mix64_array  -- the same finalizer on numpy uint64 arrays, bit-identical
    hash_full    -- 32-bit IP -> uniform 32-bit value
    hash_range   -- 32-bit IP -> uniform value in [0, m)
    lsb          -- index of the lowest set bit (32 for input 0)

Every mapping is keyed by a (master seed, domain tag) pair.  Distinct tags
give statistically independent mappings of the same key, which is what the
sketches need from their H1/H2/H3/row-hash roles.  All seeds derive from a
single master seed so a whole run is reproducible from one integer.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import IntEnum
from functools import lru_cache

import numpy as np

from .errors import ConfigError

MASK64 = 0xFFFF_FFFF_FFFF_FFFF
MASK32 = 0xFFFF_FFFF

DEFAULT_MASTER_SEED = 0x5EED

# SplitMix64 increment and finalizer multipliers.
_GOLDEN = 0x9E3779B97F4A7C15
_MIX_A = 0xBF58476D1CE4E5B9
_MIX_B = 0x94D049BB133111EB


class Tag(IntEnum):
    """Role discriminator for the hash family."""

    H1 = 1        # opposite-IP sampler (geometric lsb test)
    H2 = 2        # bit position inside a short register
    H3 = 3        # bit position inside a long register
    ROUTE = 4     # watch-point routing of IP pairs
    TRACE = 5     # synthetic trace generation
    LH_BASE = 16  # row hash i uses tag LH_BASE + i


def mix64(x: int) -> int:
    """Avalanche a 64-bit integer (SplitMix64 finalizer)."""
    z = (x + _GOLDEN) & MASK64
    z = ((z ^ (z >> 30)) * _MIX_A) & MASK64
    z = ((z ^ (z >> 27)) * _MIX_B) & MASK64
    return z ^ (z >> 31)


def mix64_array(x: np.ndarray) -> np.ndarray:
    """Vectorized mix64; bit-identical to the scalar path."""
    z = (x + np.uint64(_GOLDEN))
    z = (z ^ (z >> np.uint64(30))) * np.uint64(_MIX_A)
    z = (z ^ (z >> np.uint64(27))) * np.uint64(_MIX_B)
    return z ^ (z >> np.uint64(31))


@lru_cache(maxsize=None)
def derive_seed(master_seed: int, domain_tag: int) -> int:
    """Expand the master seed into one 64-bit domain key per tag."""
    return mix64((master_seed & MASK64) ^ ((domain_tag & 0xFF) * _GOLDEN))


@dataclass(frozen=True)
class HashSeed:
    """One member of the hash family: master seed plus an 8-bit role tag."""

    seed: int
    domain_tag: int

    @property
    def value(self) -> int:
        return derive_seed(self.seed, self.domain_tag)


class SeedFamily:
    """All domain-tagged seeds a detector needs, from one master seed."""

    def __init__(self, master_seed: int = DEFAULT_MASTER_SEED):
        self.master_seed = master_seed & MASK64
        self.h1 = HashSeed(self.master_seed, Tag.H1)
        self.h2 = HashSeed(self.master_seed, Tag.H2)
        self.h3 = HashSeed(self.master_seed, Tag.H3)
        self.route = HashSeed(self.master_seed, Tag.ROUTE)

    def lh(self, row: int) -> HashSeed:
        return HashSeed(self.master_seed, Tag.LH_BASE + row)

    def __eq__(self, other) -> bool:
        return isinstance(other, SeedFamily) and other.master_seed == self.master_seed

    def __repr__(self) -> str:
        return f"SeedFamily(0x{self.master_seed:X})"


def hash64(key: int, seed: HashSeed) -> int:
    """Full-width 64-bit hash of an integer key."""
    return mix64((key & MASK64) ^ seed.value)


def hash64_array(keys: np.ndarray, seed: HashSeed) -> np.ndarray:
    return mix64_array(keys.astype(np.uint64, copy=False) ^ np.uint64(seed.value))


def hash_full(key: int, seed: HashSeed) -> int:
    """Map a 32-bit key to a uniform 32-bit value (H1 contract)."""
    return hash64(key, seed) & MASK32


def hash_full_array(keys: np.ndarray, seed: HashSeed) -> np.ndarray:
    return hash64_array(keys, seed) & np.uint64(MASK32)


def hash_range(key: int, seed: HashSeed, m: int) -> int:
    """Map a key to a near-uniform value in [0, m)."""
    if m < 1:
        raise ConfigError(f"hash_range modulus must be >= 1, got {m}")
    return hash64(key, seed) % m


def hash_range_array(keys: np.ndarray, seed: HashSeed, m: int) -> np.ndarray:
    if m < 1:
        raise ConfigError(f"hash_range modulus must be >= 1, got {m}")
    return hash64_array(keys, seed) % np.uint64(m)


def lsb(x: int) -> int:
    """Index of the lowest set bit of a 32-bit value; 32 for input 0.

    The all-zero value is treated as maximally rare so that it passes every
    sampling threshold tau <= 32.
    """
    if x == 0:
        return 32
    return ((x & -x).bit_length()) - 1


def lsb_at_least(x: np.ndarray, tau: int) -> np.ndarray:
    """Vectorized predicate lsb(x) >= tau.

    Equivalent to the low `tau` bits being all zero, which also holds for
    x == 0 under the lsb(0) == 32 convention (tau is capped at 32).
    """
    if tau <= 0:
        return np.ones(x.shape, dtype=bool)
    mask = np.uint64((1 << min(tau, 32)) - 1)
    return (x & mask) == 0

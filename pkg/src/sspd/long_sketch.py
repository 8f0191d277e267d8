"""Linear distinct counters and the row planner for the filter stage.

One counter is a k-bit register; recording an opposite IP sets bit
H3(oip) mod k.  With z0 zero bits left, the distinct count estimate is
-k * ln(z0 / k).  A host is mapped to one counter per row by per-row
hashes of its own IP; estimation reads the bitwise AND of those rows,
which suppresses bits contributed by the other hosts sharing each cell.

The planner picks the row count minimizing the probability that a noise
bit survives the AND, for a fixed total register budget and an expected
pair volume per window.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np

from .errors import ConfigError
from .hashing import SeedFamily, hash_range, hash_range_array

_POPCOUNT8 = np.array([bin(i).count("1") for i in range(256)], dtype=np.uint16)

DEFAULT_K = 8192
DEFAULT_V = 8192
DEFAULT_DESIGN_N = 1_000_000
DEFAULT_MAX_ROWS = 8


def ldc_estimate(z0: int, k: int) -> tuple[float, bool]:
    """Distinct-count estimate from the zero-bit count of one register.

    Returns (estimate, saturated).  A fully set register cannot be
    inverted; it yields the sentinel k*ln(k) with the saturated flag so
    that callers can treat it as "at least huge".
    """
    if not 0 <= z0 <= k:
        raise ConfigError(f"zero count {z0} out of range [0, {k}]")
    if z0 == 0:
        return k * math.log(k), True
    return -k * math.log(z0 / k), False


class Ldc:
    """A single k-bit register (scalar reference implementation)."""

    def __init__(self, k: int = DEFAULT_K):
        if k < 8 or k % 8:
            raise ConfigError(f"k must be a positive multiple of 8, got {k}")
        self.k = k
        self.bits = 0

    def update(self, oip: int, seeds: SeedFamily):
        self.bits |= 1 << hash_range(oip, seeds.h3, self.k)

    def zero_count(self) -> int:
        return self.k - bin(self.bits).count("1")

    def estimate(self) -> tuple[float, bool]:
        return ldc_estimate(self.zero_count(), self.k)


def ldc_update(ldc: Ldc, oip: int, seeds: SeedFamily) -> Ldc:
    ldc.update(oip, seeds)
    return ldc


@dataclass(frozen=True)
class LdcaConfig:
    lr: int = 8
    lc: int = 1024
    k: int = DEFAULT_K

    def __post_init__(self):
        if self.lr < 1:
            raise ConfigError(f"LR must be >= 1, got {self.lr}")
        if self.lc < 1:
            raise ConfigError(f"LC must be >= 1, got {self.lc}")
        if self.k < 8 or self.k % 8:
            raise ConfigError(f"k must be a positive multiple of 8, got {self.k}")

    @property
    def v(self) -> int:
        return self.lr * self.lc

    def memory_bytes(self) -> int:
        return self.lr * self.lc * self.k // 8


class LdcaSketch:
    """LR x LC array of k-bit registers, stored as packed bytes.

    Bit b of a register lives at byte b >> 3, position b & 7 (little
    bit order), which is what numpy's packbits(bitorder="little") emits.
    """

    def __init__(self, config: LdcaConfig, seeds: SeedFamily):
        self.config = config
        self.seeds = seeds
        self.bytes_per_ldc = config.k // 8
        self.data = np.zeros((config.lr, config.lc, self.bytes_per_ldc), dtype=np.uint8)
        self._row_seed_values = [seeds.lh(i).value for i in range(config.lr)]

    def memory_bytes(self) -> int:
        return self.config.memory_bytes()

    def clear(self):
        self.data.fill(0)

    def row_column(self, row: int, hip: int) -> int:
        return hash_range(hip, self.seeds.lh(row), self.config.lc)

    def update(self, hip: int, oip: int):
        """Record one IP pair (scalar path, integer arithmetic only)."""
        cfg = self.config
        bit = hash_range(oip, self.seeds.h3, cfg.k)
        byte = bit >> 3
        mask = 1 << (bit & 7)
        for i in range(cfg.lr):
            self.data[i, self.row_column(i, hip), byte] |= mask

    def update_batch(self, hips: np.ndarray, oips: np.ndarray):
        """Record a batch of IP pairs (vectorized, integer arithmetic only)."""
        cfg = self.config
        hips = hips.astype(np.uint64, copy=False)
        oips = oips.astype(np.uint64, copy=False)
        bit = hash_range_array(oips, self.seeds.h3, cfg.k)
        byte = (bit >> np.uint64(3)).astype(np.int64)
        mask = np.left_shift(np.uint64(1), bit & np.uint64(7)).astype(np.uint8)
        for i in range(cfg.lr):
            col = (hash_range_array(hips, self.seeds.lh(i), cfg.lc)).astype(np.int64)
            np.bitwise_or.at(self.data[i], (col, byte), mask)

    def union_register(self, hip: int) -> np.ndarray:
        """AND of the host's LR row registers, as packed bytes."""
        cfg = self.config
        out = self.data[0, self.row_column(0, hip)].copy()
        for i in range(1, cfg.lr):
            np.bitwise_and(out, self.data[i, self.row_column(i, hip)], out=out)
        return out

    def estimate(self, hip: int) -> tuple[float, bool]:
        union = self.union_register(hip)
        z0 = self.config.k - int(_POPCOUNT8[union].sum())
        return ldc_estimate(z0, self.config.k)

    def merge(self, other: "LdcaSketch"):
        if other.config != self.config or other.seeds != self.seeds:
            raise ConfigError("cannot merge counter sketches with different config or seeds")
        np.bitwise_or(self.data, other.data, out=self.data)

    def payload_bytes(self) -> bytes:
        return self.data.tobytes()

    def load_payload(self, payload: bytes):
        if len(payload) != self.data.nbytes:
            raise ConfigError(f"payload is {len(payload)} bytes, config requires {self.data.nbytes}")
        self.data = np.frombuffer(payload, dtype=np.uint8).reshape(self.data.shape).copy()


def ldca_update(sketch: LdcaSketch, hip: int, oip: int) -> LdcaSketch:
    sketch.update(hip, oip)
    return sketch


def ldca_estimate(sketch: LdcaSketch, hip: int) -> tuple[float, bool]:
    return sketch.estimate(hip)


def psu(k: int, n_pairs: float, lc: float, lr: int) -> float:
    """Probability that a bit of the AND-union register is set, given
    n_pairs distinct IP pairs spread over lc columns of lr rows."""
    if k < 1 or lc <= 0 or lr < 1 or n_pairs < 0:
        raise ConfigError("psu arguments must be positive")
    return (1.0 - (1.0 - 1.0 / k) ** (n_pairs / lc)) ** lr


def plan_rows(v: int, n_pairs: float, k: int,
              max_rows: int | None = DEFAULT_MAX_ROWS) -> tuple[int, int]:
    """Row count minimizing the union noise probability for a budget of
    ``v`` registers and an expected ``n_pairs`` distinct pairs per window.

    The analytic optimum is -v*ln(2) / (n_pairs * ln(1 - 1/k)); the
    nearest integer is returned, clamped to [1, max_rows] (merging cost
    grows with the row count, so a ceiling is kept by default).
    Returns (lr, lc) with lc = v // lr.
    """
    if v < 1 or n_pairs <= 0 or k < 2:
        raise ConfigError("plan_rows arguments must be positive (k >= 2)")
    raw = -v * math.log(2.0) / (n_pairs * math.log(1.0 - 1.0 / k))
    lr = max(1, round(raw))
    if max_rows is not None:
        lr = min(lr, max_rows)
    lr = min(lr, v)
    return lr, v // lr


def noise_factor(k: int, n_pairs: float, lc: float, lr: int) -> float:
    """Expected noise bits in a union register: psu * k (want < 1)."""
    return psu(k, n_pairs, lc, lr) * k


def check_noise(k: int, n_pairs: float, lc: float, lr: int) -> float:
    """Warn when the planned geometry leaves >= 1 expected noise bit."""
    factor = noise_factor(k, n_pairs, lc, lr)
    if factor >= 1.0:
        warnings.warn(
            f"expected union noise psu*k = {factor:.3g} >= 1 for "
            f"(k={k}, N={n_pairs:g}, LC={lc}, LR={lr}); estimates will be inflated",
            RuntimeWarning,
            stacklevel=2,
        )
    return factor

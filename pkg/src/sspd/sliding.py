"""Sliding-window detection: every sketch bit is replaced by a
last-active-slice timestamp, so the live window is a read-time predicate
(age < window slices) instead of a per-window reinitialization.

Timestamps are stored wrapped in the smallest unsigned dtype whose
modulus leaves a safety margin of at least 2x the window between wraps.
An amortized sweep clamps long-idle slots to "just expired" before their
wrapped age could alias as fresh; advancing a slice is O(1) otherwise.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConfigError
from .hashing import SeedFamily, hash_full_array, hash_range, hash_range_array, lsb_at_least
from .long_sketch import ldc_estimate
from .short_sketch import SeavSketch
from .window_detector import DetectionReport, DetectorParams


def timestamp_dtype(window_slices: int):
    """Smallest unsigned dtype whose modulus is >= 2*window + 2."""
    need = 2 * window_slices + 2
    for dt in (np.uint8, np.uint16, np.uint32, np.uint64):
        if need <= (1 << (8 * np.dtype(dt).itemsize)):
            return dt
    raise ConfigError(f"window of {window_slices} slices is too large to timestamp")


class TimestampPool:
    """A fixed pool of per-bit timestamps with lazy expiry.

    A slot is active iff now - timestamp < window_slices.  Slot count is
    fixed at construction and never changes while running.
    """

    def __init__(self, n_slots: int, window_slices: int, slice_seconds: float = 1.0):
        if n_slots < 1:
            raise ConfigError(f"slot count must be >= 1, got {n_slots}")
        if window_slices < 1:
            raise ConfigError(f"window must span >= 1 slice, got {window_slices}")
        self.n_slots = n_slots
        self.window_slices = window_slices
        self.slice_seconds = slice_seconds
        self.now = 0
        dt = timestamp_dtype(window_slices)
        self._modulus = 1 << (8 * np.dtype(dt).itemsize)
        self._mask = self._modulus - 1
        # Idle period between mandatory sweeps; ages stay < modulus.
        self._sweep_period = self._modulus - 2 * window_slices
        self._since_sweep = 0
        self.sweep_count = 0
        # Initialize to age == window (exactly expired).
        self.ts = np.full(n_slots, (-window_slices) & self._mask, dtype=dt)

    def memory_bytes(self) -> int:
        return self.ts.nbytes

    def _wrapped_now(self) -> int:
        return self.now & self._mask

    def touch(self, slot_index: int, now: int | None = None):
        """Stamp one slot; out-of-order stamps keep the newest value."""
        if not 0 <= slot_index < self.n_slots:
            raise ConfigError(f"slot {slot_index} out of range [0, {self.n_slots})")
        now = self.now if now is None else now
        candidate_age = self.now - now
        if candidate_age < 0:
            raise ConfigError(f"cannot stamp future slice {now} (pool is at {self.now})")
        existing_age = (self._wrapped_now() - int(self.ts[slot_index])) & self._mask
        if candidate_age < existing_age:
            self.ts[slot_index] = now & self._mask

    def touch_batch(self, slot_indexes: np.ndarray):
        """Stamp many slots with the current slice (newest always wins)."""
        self.ts[slot_indexes] = self._wrapped_now()

    def advance_slice(self):
        """Move to the next slice.  O(1) except the rare anti-alias sweep."""
        self.now += 1
        self._since_sweep += 1
        if self._since_sweep >= self._sweep_period:
            self._sweep()

    def _sweep(self):
        """Clamp every expired slot to age == window so wrapped ages never alias."""
        ages = (np.uint64(self._wrapped_now()) - self.ts.astype(np.uint64)) & np.uint64(self._mask)
        stale = ages >= self.window_slices
        self.ts[stale] = (self.now - self.window_slices) & self._mask
        self._since_sweep = 0
        self.sweep_count += 1

    def ages(self) -> np.ndarray:
        return ((np.uint64(self._wrapped_now()) - self.ts.astype(np.uint64))
                & np.uint64(self._mask))

    def active(self) -> np.ndarray:
        """Boolean view: slot touched within the last window_slices slices."""
        return self.ages() < self.window_slices

    def is_active(self, slot_index: int) -> bool:
        existing_age = (self._wrapped_now() - int(self.ts[slot_index])) & self._mask
        return existing_age < self.window_slices


def touch(pool: TimestampPool, slot_index: int, now: int) -> TimestampPool:
    pool.touch(slot_index, now)
    return pool


def advance_slice(pool: TimestampPool) -> TimestampPool:
    pool.advance_slice()
    return pool


@dataclass(frozen=True)
class _SlotLayout:
    """Flat slot numbering: candidate-sketch bits first, then counter bits."""

    seav_row_base: tuple[int, ...]
    ldca_base: int
    total: int


class SlidingDetector:
    """Sliding-window pipeline over a single shared timestamp pool."""

    def __init__(self, params: DetectorParams | None = None,
                 window_slices: int = 300, slice_seconds: float = 1.0):
        self.params = params or DetectorParams()
        self.seeds = SeedFamily(self.params.master_seed)
        self.seav_config = self.params.seav_config()
        self.ldca_config = self.params.ldca_config()
        bases = []
        offset = 0
        cfg = self.seav_config
        for i in range(cfg.sr):
            bases.append(offset)
            offset += (1 << cfg.r) * cfg.sc[i] * cfg.g
        lcfg = self.ldca_config
        self.layout = _SlotLayout(tuple(bases), offset,
                                  offset + lcfg.lr * lcfg.lc * lcfg.k)
        self.pool = TimestampPool(self.layout.total, window_slices, slice_seconds)
        self.pair_count = 0

    @property
    def now(self) -> int:
        return self.pool.now

    def advance_slice(self):
        self.pool.advance_slice()

    def observe_batch(self, hips: np.ndarray, oips: np.ndarray):
        """Stamp the slots both sketches would set for these pairs."""
        cfg = self.seav_config
        lcfg = self.ldca_config
        hips = hips.astype(np.uint64, copy=False)
        oips = oips.astype(np.uint64, copy=False)

        h1 = hash_full_array(oips, self.seeds.h1)
        keep = lsb_at_least(h1, cfg.tau)
        if keep.any():
            s_hips = hips[keep]
            s_oips = oips[keep]
            bitpos = hash_range_array(s_oips, self.seeds.h2, cfg.g)
            rp = s_hips & np.uint64((1 << cfg.r) - 1)
            lp = (s_hips >> np.uint64(cfg.r)) & np.uint64((1 << cfg.lp_bits) - 1)
            for i in range(cfg.sr):
                col = cfg.index_of_array(i, lp)
                slots = (np.uint64(self.layout.seav_row_base[i])
                         + (rp * np.uint64(cfg.sc[i]) + col) * np.uint64(cfg.g)
                         + bitpos)
                self.pool.touch_batch(slots.astype(np.int64))

        bit = hash_range_array(oips, self.seeds.h3, lcfg.k)
        for i in range(lcfg.lr):
            col = hash_range_array(hips, self.seeds.lh(i), lcfg.lc)
            slots = (np.uint64(self.layout.ldca_base)
                     + (np.uint64(i * lcfg.lc) + col) * np.uint64(lcfg.k)
                     + bit)
            self.pool.touch_batch(slots.astype(np.int64))
        self.pair_count += len(hips)

    def observe(self, hip: int, oip: int):
        self.observe_batch(np.array([hip], dtype=np.uint64),
                           np.array([oip], dtype=np.uint64))

    def materialize_seav(self) -> SeavSketch:
        """Active-bit view of the candidate sketch as a regular sketch."""
        cfg = self.seav_config
        sketch = SeavSketch(cfg, self.seeds, restore_cap=self.params.restore_cap)
        active = self.pool.active()
        weights = np.left_shift(np.uint64(1), np.arange(cfg.g, dtype=np.uint64))
        for i in range(cfg.sr):
            base = self.layout.seav_row_base[i]
            size = (1 << cfg.r) * cfg.sc[i] * cfg.g
            bits = active[base:base + size].reshape((1 << cfg.r), cfg.sc[i], cfg.g)
            regs = (bits.astype(np.uint64) * weights).sum(axis=-1)
            sketch.rows[i] = regs.astype(sketch.rows[i].dtype)
        return sketch

    def materialize_ldca_cell(self, row: int, col: int) -> np.ndarray:
        """Active bits of one counter cell, packed little-endian."""
        lcfg = self.ldca_config
        base = self.layout.ldca_base + (row * lcfg.lc + col) * lcfg.k
        ages = ((np.uint64(self.pool._wrapped_now())
                 - self.pool.ts[base:base + lcfg.k].astype(np.uint64))
                & np.uint64(self.pool._mask))
        bits = (ages < self.pool.window_slices).astype(np.uint8)
        return np.packbits(bits, bitorder="little")

    def materialize_ldca(self) -> np.ndarray:
        """Full active-bit view of the counter array as packed bytes."""
        lcfg = self.ldca_config
        base = self.layout.ldca_base
        bits = self.pool.active()[base:].reshape(lcfg.lr, lcfg.lc, lcfg.k).astype(np.uint8)
        return np.packbits(bits, axis=-1, bitorder="little")

    def _estimate(self, hip: int) -> tuple[float, bool]:
        lcfg = self.ldca_config
        union = None
        for i in range(lcfg.lr):
            col = hash_range(hip, self.seeds.lh(i), lcfg.lc)
            cell = self.materialize_ldca_cell(i, col)
            union = cell if union is None else (union & cell)
        z0 = lcfg.k - int(np.unpackbits(union, bitorder="little").sum())
        return ldc_estimate(z0, lcfg.k)

    def detect(self, beta: float | None = None) -> list[DetectionReport]:
        """Run restore + filter over the active view at the current slice."""
        beta = self.params.beta if beta is None else beta
        cutoff = beta * self.params.theta
        seav = self.materialize_seav()
        reports = []
        for cand in seav.restore(on_overflow="warn"):
            est, saturated = self._estimate(cand.ip)
            if saturated or est >= cutoff:
                reports.append(DetectionReport(
                    ip=cand.ip,
                    estimated_cardinality=est,
                    saturated=saturated,
                    window_id=self.now,
                    source="sliding",
                ))
        return reports


def detect_sliding(detector: SlidingDetector, theta: int | None = None,
                   beta: float | None = None) -> list[DetectionReport]:
    if theta is not None and theta != detector.params.theta:
        raise ValueError(
            f"detector was configured with theta={detector.params.theta}, got {theta}")
    return detector.detect(beta=beta)

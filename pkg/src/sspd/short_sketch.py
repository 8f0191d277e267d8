"""Short-register candidate sketch: tiny g-bit registers arranged so that
the IP addresses of high fan-out hosts can be reconstructed from register
coordinates alone.

A host IP splits into a right part RP (low ``r`` bits, selecting one of
2^r register arrays) and a left part LP (the remaining bits).  Each array
has ``SR`` rows; row ``i`` indexes its registers by an ``IBN(i)``-bit
slice of LP starting at bit ``ISB(i)``, with consecutive rows overlapping
in ``a`` bit positions.  Every distinct opposite IP that survives a
geometric sampling test sets one bit in the host's register of every row.
At the end of a window, rows are scanned for "hot" registers (weight >= 3)
and LPs are reassembled from consistent hot-column tuples.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError, SeaOverflowError
from .hashing import (
    SeedFamily,
    hash_full,
    hash_full_array,
    hash_range,
    hash_range_array,
    lsb,
    lsb_at_least,
)

DEFAULT_RESTORE_CAP = 1 << 20

_POPCOUNT8 = np.array([bin(i).count("1") for i in range(256)], dtype=np.uint8)


def tau_from_theta(theta: int, g: int) -> int:
    """Sampling threshold: smallest t >= 0 with g * 2^t >= theta.

    Integer-exact equivalent of ceil(log2(theta / g)) floored at 0.
    """
    if theta < 1:
        raise ConfigError(f"theta must be >= 1, got {theta}")
    if g < 1:
        raise ConfigError(f"register width g must be >= 1, got {g}")
    t = 0
    while (g << t) < theta:
        t += 1
    return t


def _register_dtype(g: int):
    for dt in (np.uint8, np.uint16, np.uint32, np.uint64):
        if g <= np.dtype(dt).itemsize * 8:
            return dt
    raise ConfigError(f"register width g must be <= 64, got {g}")


@dataclass(frozen=True)
class ShortEstimator:
    """One g-bit register.  Bits only ever transition 0 -> 1 in a window."""

    bits: int = 0
    g: int = 8

    def __post_init__(self):
        if not 0 <= self.bits < (1 << self.g):
            raise ConfigError(f"register value {self.bits} out of range for g={self.g}")

    def update(self, oip: int, tau: int, seeds: SeedFamily) -> "ShortEstimator":
        """Record one opposite IP; a bit is set only if the sampling test passes."""
        if lsb(hash_full(oip, seeds.h1)) >= tau:
            return ShortEstimator(self.bits | (1 << hash_range(oip, seeds.h2, self.g)), self.g)
        return self

    def weight(self) -> int:
        return bin(self.bits).count("1")

    def is_hot(self) -> bool:
        return self.weight() >= 3

    def _check_width(self, other: "ShortEstimator"):
        if other.g != self.g:
            raise ConfigError(f"register width mismatch: {self.g} vs {other.g}")

    def __and__(self, other: "ShortEstimator") -> "ShortEstimator":
        self._check_width(other)
        return ShortEstimator(self.bits & other.bits, self.g)

    def __or__(self, other: "ShortEstimator") -> "ShortEstimator":
        self._check_width(other)
        return ShortEstimator(self.bits | other.bits, self.g)


def se_update(se: ShortEstimator, oip: int, tau: int, seeds: SeedFamily) -> ShortEstimator:
    return se.update(oip, tau, seeds)


def se_weight(se: ShortEstimator) -> int:
    return se.weight()


def se_is_hot(se: ShortEstimator) -> bool:
    return se.is_hot()


def se_and(x: ShortEstimator, y: ShortEstimator) -> ShortEstimator:
    return x & y


def se_or(x: ShortEstimator, y: ShortEstimator) -> ShortEstimator:
    return x | y


@dataclass(frozen=True)
class SeavConfig:
    """Geometry of the candidate sketch.

    ``addr_bits`` is normally 32 (IPv4); smaller widths exist so tests can
    brute-force the whole address space.
    """

    r: int = 4
    sr: int = 4
    a: int = 2
    theta: int = 1024
    g: int = 8
    addr_bits: int = 32
    isb: tuple[int, ...] = field(init=False)
    ibn: tuple[int, ...] = field(init=False)
    sc: tuple[int, ...] = field(init=False)
    tau: int = field(init=False)

    def __post_init__(self):
        if not 0 <= self.r <= 16:
            raise ConfigError(f"r must be in [0, 16], got {self.r}")
        if self.sr < 2:
            raise ConfigError(f"SR must be >= 2 (row overlap needs a partner), got {self.sr}")
        if self.a < 1:
            raise ConfigError(f"overlap a must be >= 1, got {self.a}")
        if not 2 <= self.addr_bits <= 32:
            raise ConfigError(f"addr_bits must be in [2, 32], got {self.addr_bits}")
        w = self.lp_bits
        if w < 1:
            raise ConfigError(f"r={self.r} leaves no left-part bits for addr_bits={self.addr_bits}")
        c = -(-w // self.sr)  # ceil(w / SR)
        if c + self.a > w:
            raise ConfigError(
                f"index width {c + self.a} exceeds left-part width {w} (SR too large or a too large)"
            )
        object.__setattr__(self, "isb", tuple(i * c for i in range(self.sr)))
        object.__setattr__(self, "ibn", tuple(c + self.a for _ in range(self.sr)))
        object.__setattr__(self, "sc", tuple(1 << n for n in self.ibn))
        object.__setattr__(self, "tau", tau_from_theta(self.theta, self.g))
        _register_dtype(self.g)
        self._verify_constraints()

    @property
    def lp_bits(self) -> int:
        return self.addr_bits - self.r

    def _row_positions(self, i: int) -> set[int]:
        w = self.lp_bits
        return {(self.isb[i] + j) % w for j in range(self.ibn[i])}

    def _verify_constraints(self):
        w = self.lp_bits
        covered: set[int] = set()
        for i in range(self.sr):
            covered |= self._row_positions(i)
        if covered != set(range(w)):
            missing = sorted(set(range(w)) - covered)
            raise ConfigError(f"constraint 1 violated: left-part bits {missing} not covered by any row")
        for i in range(self.sr):
            overlap = self._row_positions(i) & self._row_positions((i + 1) % self.sr)
            if len(overlap) != self.a:
                raise ConfigError(
                    f"constraint 2 violated: rows {i} and {(i + 1) % self.sr} share "
                    f"{len(overlap)} bit positions, expected {self.a}"
                )

    def index_of(self, row: int, lp: int) -> int:
        """Column of the register holding ``lp`` in ``row``.

        Bit j of the index is bit (ISB[row]+j) mod lp_bits of lp.
        """
        if not 0 <= row < self.sr:
            raise ConfigError(f"row {row} out of range [0, {self.sr})")
        w = self.lp_bits
        idx = 0
        for j in range(self.ibn[row]):
            idx |= ((lp >> ((self.isb[row] + j) % w)) & 1) << j
        return idx

    def index_of_array(self, row: int, lp: np.ndarray) -> np.ndarray:
        if not 0 <= row < self.sr:
            raise ConfigError(f"row {row} out of range [0, {self.sr})")
        w = self.lp_bits
        idx = np.zeros(lp.shape, dtype=np.uint64)
        one = np.uint64(1)
        for j in range(self.ibn[row]):
            src = np.uint64((self.isb[row] + j) % w)
            idx |= ((lp >> src) & one) << np.uint64(j)
        return idx

    def lp_from_indexes(self, indexes: list[int] | tuple[int, ...]) -> int:
        """Reassemble a left part from one column index per row (inverse of index_of)."""
        if len(indexes) != self.sr:
            raise ConfigError(f"need {self.sr} indexes, got {len(indexes)}")
        w = self.lp_bits
        lp = 0
        for i, idx in enumerate(indexes):
            for j in range(self.ibn[i]):
                if (idx >> j) & 1:
                    lp |= 1 << ((self.isb[i] + j) % w)
        return lp

    def memory_bytes(self) -> int:
        per_register = np.dtype(_register_dtype(self.g)).itemsize
        return (1 << self.r) * sum(self.sc) * per_register

    # Scatter tables for the restore walk: column -> (lp fragment, position mask).
    def _row_scatter(self, i: int) -> tuple[np.ndarray, int]:
        w = self.lp_bits
        cols = np.arange(self.sc[i], dtype=np.uint64)
        vals = np.zeros(self.sc[i], dtype=np.uint64)
        mask = 0
        one = np.uint64(1)
        for j in range(self.ibn[i]):
            pos = (self.isb[i] + j) % w
            vals |= ((cols >> np.uint64(j)) & one) << np.uint64(pos)
            mask |= 1 << pos
        return vals, mask


def make_config(r: int = 4, sr: int = 4, a: int = 2, theta: int = 1024, g: int = 8,
                addr_bits: int = 32) -> SeavConfig:
    return SeavConfig(r=r, sr=sr, a=a, theta=theta, g=g, addr_bits=addr_bits)


def index_of(config: SeavConfig, row: int, lp: int) -> int:
    return config.index_of(row, lp)


def lp_from_indexes(config: SeavConfig, indexes: list[int] | tuple[int, ...]) -> int:
    return config.lp_from_indexes(indexes)


@dataclass(frozen=True)
class CandidateHost:
    """A reconstructed IP whose row-register AND still has weight >= 3."""

    ip: int
    source_sea: int
    union_weight: int


class SeavSketch:
    """2^r register arrays of SR rows each, plus the restore walk.

    Updates are monotone bit-sets, so any stream permutation or sharding
    followed by an OR-merge yields bit-identical state.
    """

    def __init__(self, config: SeavConfig, seeds: SeedFamily,
                 restore_cap: int = DEFAULT_RESTORE_CAP):
        self.config = config
        self.seeds = seeds
        self.restore_cap = restore_cap
        dt = _register_dtype(config.g)
        self.rows = [np.zeros(((1 << config.r), config.sc[i]), dtype=dt)
                     for i in range(config.sr)]
        self._scatter = [(vals.tolist(), mask)
                         for vals, mask in (config._row_scatter(i) for i in range(config.sr))]

    def memory_bytes(self) -> int:
        return self.config.memory_bytes()

    def clear(self):
        for arr in self.rows:
            arr.fill(0)

    def _split(self, hip: int) -> tuple[int, int]:
        rp = hip & ((1 << self.config.r) - 1)
        lp = (hip >> self.config.r) & ((1 << self.config.lp_bits) - 1)
        return rp, lp

    def update(self, hip: int, oip: int):
        """Record one IP pair (scalar path, integer arithmetic only)."""
        cfg = self.config
        if lsb(hash_full(oip, self.seeds.h1)) < cfg.tau:
            return
        bit = 1 << hash_range(oip, self.seeds.h2, cfg.g)
        rp, lp = self._split(hip)
        for i in range(cfg.sr):
            col = cfg.index_of(i, lp)
            self.rows[i][rp, col] |= bit

    def update_batch(self, hips: np.ndarray, oips: np.ndarray):
        """Record a batch of IP pairs (vectorized, integer arithmetic only)."""
        cfg = self.config
        hips = hips.astype(np.uint64, copy=False)
        oips = oips.astype(np.uint64, copy=False)
        h1 = hash_full_array(oips, self.seeds.h1)
        keep = lsb_at_least(h1, cfg.tau)
        if not keep.any():
            return
        hips = hips[keep]
        oips = oips[keep]
        bit = np.left_shift(
            np.uint64(1), hash_range_array(oips, self.seeds.h2, cfg.g)
        ).astype(self.rows[0].dtype)
        rp = (hips & np.uint64((1 << cfg.r) - 1)).astype(np.int64)
        lp = (hips >> np.uint64(cfg.r)) & np.uint64((1 << cfg.lp_bits) - 1)
        for i in range(cfg.sr):
            col = cfg.index_of_array(i, lp).astype(np.int64)
            np.bitwise_or.at(self.rows[i], (rp, col), bit)

    def se_at(self, rp: int, row: int, col: int) -> ShortEstimator:
        return ShortEstimator(int(self.rows[row][rp, col]), self.config.g)

    def total_set_bits(self) -> int:
        return sum(int(_POPCOUNT8[arr.view(np.uint8)].sum()) for arr in self.rows)

    def merge(self, other: "SeavSketch"):
        """OR another sketch into this one (cross-watch-point merge)."""
        if other.config != self.config or other.seeds != self.seeds:
            raise ConfigError("cannot merge register sketches with different config or seeds")
        for mine, theirs in zip(self.rows, other.rows):
            np.bitwise_or(mine, theirs, out=mine)

    def payload_bytes(self) -> bytes:
        return b"".join(arr.tobytes() for arr in self.rows)

    def load_payload(self, payload: bytes):
        dt = self.rows[0].dtype
        expected = sum(arr.nbytes for arr in self.rows)
        if len(payload) != expected:
            raise ConfigError(f"payload is {len(payload)} bytes, config requires {expected}")
        off = 0
        for i, arr in enumerate(self.rows):
            chunk = np.frombuffer(payload[off:off + arr.nbytes], dtype=dt)
            self.rows[i] = chunk.reshape(arr.shape).copy()
            off += arr.nbytes

    def restore_sea(self, rp: int) -> list[CandidateHost]:
        """Reconstruct candidates for one register array.

        Depth-first over rows: a partial tuple is dropped as soon as its
        column bits disagree with already-fixed left-part bits.  Raises
        SeaOverflowError once more than ``restore_cap`` tuples survive the
        consistency pruning.
        """
        cfg = self.config
        hot: list[list[tuple[int, int]]] = []
        for i in range(cfg.sr):
            regs = self.rows[i][rp]
            weights = _POPCOUNT8[regs.view(np.uint8).reshape(len(regs), -1)].sum(axis=1)
            cols = np.nonzero(weights >= 3)[0]
            if len(cols) == 0:
                return []
            hot.append([(int(c), int(regs[c])) for c in cols])

        scatter_vals = [self._scatter[i][0] for i in range(cfg.sr)]
        row_masks = [self._scatter[i][1] for i in range(cfg.sr)]
        full_bits = (1 << cfg.g) - 1
        survivors = 0
        out: list[CandidateHost] = []

        def walk(i: int, acc_mask: int, acc_lp: int, acc_and: int):
            nonlocal survivors
            if i == cfg.sr:
                survivors += 1
                if survivors > self.restore_cap:
                    raise SeaOverflowError(rp, self.restore_cap)
                w = bin(acc_and).count("1")
                if w >= 3:
                    out.append(CandidateHost((acc_lp << cfg.r) | rp, rp, w))
                return
            vals = scatter_vals[i]
            mask = row_masks[i]
            for col, bits in hot[i]:
                v = vals[col]
                if (acc_lp ^ v) & (acc_mask & mask):
                    continue
                walk(i + 1, acc_mask | mask, acc_lp | v, acc_and & bits)

        walk(0, 0, 0, full_bits)
        return out

    def restore(self, on_overflow: str = "raise") -> list[CandidateHost]:
        """Reconstruct candidates across all register arrays, sorted by IP.

        ``on_overflow`` is "raise" (propagate the first per-array overflow)
        or "warn" (skip the offending array and keep going).
        """
        found: dict[int, CandidateHost] = {}
        for rp in range(1 << self.config.r):
            try:
                for cand in self.restore_sea(rp):
                    found[cand.ip] = cand
            except SeaOverflowError as exc:
                if on_overflow == "warn":
                    warnings.warn(str(exc), RuntimeWarning, stacklevel=2)
                    continue
                raise
        return [found[ip] for ip in sorted(found)]


def seav_update(sketch: SeavSketch, hip: int, oip: int) -> SeavSketch:
    sketch.update(hip, oip)
    return sketch


def seav_restore(sketch: SeavSketch, on_overflow: str = "raise") -> list[CandidateHost]:
    return sketch.restore(on_overflow=on_overflow)

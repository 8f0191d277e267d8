"""Ground truth, accuracy metrics, and synthetic trace generation.

The oracle keeps exact per-host distinct opposite-IP sets, so detector
output can be scored without any estimation error of its own.  Note the
rate definitions: both the false-positive and the false-negative rate
are normalized by the number of true super points (not by the number of
detections), and their sum is the headline "false total rate".
"""

from __future__ import annotations

import ipaddress
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import ConfigError, DataError, UndefinedMetricError
from .hashing import mix64

TRACE_DTYPE = np.dtype([("slice", "<u4"), ("hip", "<u4"), ("oip", "<u4")])


def ip_to_str(ip: int) -> str:
    return str(ipaddress.IPv4Address(ip))


def ip_from_str(text: str) -> int:
    return int(ipaddress.IPv4Address(text))


class ExactOracle:
    """Exact per-host opposite-IP counts via sort-unique over the trace."""

    def __init__(self, hips: np.ndarray, oips: np.ndarray):
        key = (hips.astype(np.uint64) << np.uint64(32)) | oips.astype(np.uint64)
        distinct = np.unique(key)
        hosts, counts = np.unique(distinct >> np.uint64(32), return_counts=True)
        self.hosts = hosts.astype(np.uint32)
        self.counts = counts.astype(np.int64)

    @classmethod
    def from_mapping(cls, cardinalities: dict[int, int]) -> "ExactOracle":
        oracle = cls.__new__(cls)
        items = sorted(cardinalities.items())
        oracle.hosts = np.array([ip for ip, _ in items], dtype=np.uint32)
        oracle.counts = np.array([c for _, c in items], dtype=np.int64)
        return oracle

    def cardinality(self, hip: int) -> int:
        i = np.searchsorted(self.hosts, hip)
        if i < len(self.hosts) and self.hosts[i] == hip:
            return int(self.counts[i])
        return 0

    def superpoints(self, theta: int) -> list[int]:
        """Hosts with at least theta distinct opposite IPs, sorted."""
        return [int(ip) for ip in self.hosts[self.counts >= theta]]


def exact_cardinalities_dict(hips: np.ndarray, oips: np.ndarray) -> dict[int, int]:
    """Independent oracle implementation: hash sets, one per host."""
    seen: dict[int, set[int]] = {}
    for hip, oip in zip(hips.tolist(), oips.tolist()):
        seen.setdefault(hip, set()).add(oip)
    return {hip: len(s) for hip, s in seen.items()}


def oracle_superpoints(oracle: ExactOracle, theta: int) -> list[int]:
    return oracle.superpoints(theta)


def metrics(detected: list[int], truth: list[int]) -> tuple[float, float, float]:
    """(FPR, FNR, FTR), all normalized by the true super-point count."""
    truth_set = set(truth)
    if not truth_set:
        raise UndefinedMetricError("metrics are undefined for an empty truth set")
    detected_set = set(detected)
    fpr = len(detected_set - truth_set) / len(truth_set)
    fnr = len(truth_set - detected_set) / len(truth_set)
    return fpr, fnr, fpr + fnr


def metrics_report(detected: list[int], truth: list[int]) -> dict[str, float]:
    """Metrics plus a conventional precision figure (not one of the paper
    trio; kept clearly labeled for sanity checks)."""
    fpr, fnr, ftr = metrics(detected, truth)
    detected_set, truth_set = set(detected), set(truth)
    precision = (len(detected_set & truth_set) / len(detected_set)) if detected_set else 1.0
    return {
        "fpr": fpr,
        "fnr": fnr,
        "ftr": ftr,
        "precision_nonpaper": precision,
        "detected": float(len(detected_set)),
        "truth": float(len(truth_set)),
    }


@dataclass(frozen=True)
class TraceSpec:
    """Recipe for a synthetic trace with planted heavy hosts."""

    n_super: int = 50
    super_cardinality_range: tuple[int, int] = (2048, 2048)
    n_background: int = 100_000
    background_cardinality_range: tuple[int, int] = (1, 8)
    n_pairs: int = 1_000_000
    slices: int = 1
    seed: int = 1

    def __post_init__(self):
        for name, (lo, hi) in (("super", self.super_cardinality_range),
                               ("background", self.background_cardinality_range)):
            if lo < 1 or hi < lo:
                raise ConfigError(f"bad {name} cardinality range ({lo}, {hi})")
        if self.n_super < 0 or self.n_background < 0 or self.slices < 1:
            raise ConfigError("counts must be non-negative and slices >= 1")


def _distinct_u32(rng: np.random.Generator, n: int) -> np.ndarray:
    """n distinct uniform 32-bit values."""
    out = np.unique(rng.integers(0, 1 << 32, size=n, dtype=np.uint32))
    while len(out) < n:
        more = rng.integers(0, 1 << 32, size=n - len(out) + 16, dtype=np.uint32)
        out = np.unique(np.concatenate([out, more]))
    out = out[:n]
    rng.shuffle(out)
    return out


def _distinct_per_host(rng: np.random.Generator, cards: np.ndarray) -> np.ndarray:
    """Concatenated opposite-IP draws, distinct within each host's block."""
    total = int(cards.sum())
    host_idx = np.repeat(np.arange(len(cards), dtype=np.int64), cards)
    oips = rng.integers(0, 1 << 32, size=total, dtype=np.uint32)
    while True:
        # Duplicates within a host show up as equal adjacent (host, oip) keys.
        key = (host_idx.astype(np.uint64) << np.uint64(32)) | oips.astype(np.uint64)
        order = np.argsort(key, kind="stable")
        sorted_key = key[order]
        dup_positions = order[1:][sorted_key[1:] == sorted_key[:-1]]
        if len(dup_positions) == 0:
            return oips
        oips[dup_positions] = rng.integers(0, 1 << 32, size=len(dup_positions),
                                           dtype=np.uint32)


@dataclass
class Trace:
    slices: np.ndarray
    hips: np.ndarray
    oips: np.ndarray
    truth: dict[int, int]

    def __len__(self) -> int:
        return len(self.hips)


def generate_trace(spec: TraceSpec) -> Trace:
    """Deterministic synthetic trace: planted supers and background hosts,
    every distinct pair emitted at least once, remainder filled with
    repeats, the whole stream shuffled across slices."""
    rng = np.random.default_rng(mix64(spec.seed))
    n_hosts = spec.n_super + spec.n_background
    hosts = _distinct_u32(rng, n_hosts) if n_hosts else np.array([], dtype=np.uint32)
    cards = np.concatenate([
        rng.integers(spec.super_cardinality_range[0],
                     spec.super_cardinality_range[1] + 1, size=spec.n_super),
        rng.integers(spec.background_cardinality_range[0],
                     spec.background_cardinality_range[1] + 1, size=spec.n_background),
    ]).astype(np.int64) if n_hosts else np.array([], dtype=np.int64)

    distinct_oips = _distinct_per_host(rng, cards)
    distinct_hips = np.repeat(hosts, cards)
    n_distinct = len(distinct_hips)
    if spec.n_pairs < n_distinct:
        raise ConfigError(
            f"n_pairs={spec.n_pairs} cannot cover the {n_distinct} planted distinct pairs")
    if n_distinct == 0 and spec.n_pairs > 0:
        raise ConfigError("cannot emit pairs from an empty host population")

    extra = spec.n_pairs - n_distinct
    if extra:
        pick = rng.integers(0, n_distinct, size=extra)
        hips = np.concatenate([distinct_hips, distinct_hips[pick]])
        oips = np.concatenate([distinct_oips, distinct_oips[pick]])
    else:
        hips, oips = distinct_hips, distinct_oips

    order = rng.permutation(spec.n_pairs)
    slices = rng.integers(0, spec.slices, size=spec.n_pairs, dtype=np.uint32)
    truth = {int(ip): int(c) for ip, c in zip(hosts.tolist(), cards.tolist())}
    return Trace(slices=slices, hips=hips[order], oips=oips[order], truth=truth)


def write_trace(trace: Trace, path: Path | str, text: bool = False):
    """Binary 12-byte records by default; one `slice,src,dst` line each in
    text mode.  A `<path>.truth` sidecar lists every host's exact count."""
    path = Path(path)
    if text:
        with path.open("w") as fh:
            for s, h, o in zip(trace.slices.tolist(), trace.hips.tolist(),
                               trace.oips.tolist()):
                fh.write(f"{s},{ip_to_str(h)},{ip_to_str(o)}\n")
    else:
        rec = np.empty(len(trace), dtype=TRACE_DTYPE)
        rec["slice"] = trace.slices
        rec["hip"] = trace.hips
        rec["oip"] = trace.oips
        path.write_bytes(rec.tobytes())
    write_truth(trace.truth, truth_path(path))


def truth_path(trace_path: Path | str) -> Path:
    return Path(str(trace_path) + ".truth")


def write_truth(truth: dict[int, int], path: Path | str):
    with Path(path).open("w") as fh:
        for ip in sorted(truth):
            fh.write(f"{ip_to_str(ip)} {truth[ip]}\n")


def read_truth(path: Path | str) -> dict[int, int]:
    truth = {}
    for line in Path(path).read_text().splitlines():
        if not line.strip():
            continue
        ip, card = line.split()
        truth[ip_from_str(ip)] = int(card)
    return truth


def read_trace(path: Path | str) -> Trace:
    path = Path(path)
    if path.suffix == ".txt":
        slices, hips, oips = [], [], []
        for line in path.read_text().splitlines():
            if not line.strip():
                continue
            s, h, o = line.split(",")
            slices.append(int(s))
            hips.append(ip_from_str(h))
            oips.append(ip_from_str(o))
        return Trace(slices=np.array(slices, dtype=np.uint32),
                     hips=np.array(hips, dtype=np.uint32),
                     oips=np.array(oips, dtype=np.uint32), truth={})
    raw = path.read_bytes()
    if len(raw) % TRACE_DTYPE.itemsize:
        raise DataError(f"{path} is not a whole number of {TRACE_DTYPE.itemsize}-byte records")
    rec = np.frombuffer(raw, dtype=TRACE_DTYPE)
    return Trace(slices=rec["slice"].copy(), hips=rec["hip"].copy(),
                 oips=rec["oip"].copy(), truth={})

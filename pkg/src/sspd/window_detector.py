"""Discrete-window detection pipeline: one candidate sketch plus one
counter sketch per window, reset at window boundaries.

Per-pair updates touch both sketches and stay in integer arithmetic;
floating point appears only when a window is finalized.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .hashing import DEFAULT_MASTER_SEED, SeedFamily
from .long_sketch import (
    DEFAULT_DESIGN_N,
    DEFAULT_V,
    LdcaConfig,
    LdcaSketch,
    check_noise,
    plan_rows,
)
from .short_sketch import DEFAULT_RESTORE_CAP, SeavConfig, SeavSketch

DEFAULT_BETA = 0.8


@dataclass(frozen=True)
class DetectionReport:
    """One detected host: IP, its estimated fan-out, and provenance."""

    ip: int
    estimated_cardinality: float
    saturated: bool
    window_id: int
    source: str = "discrete"


@dataclass
class DetectorParams:
    """Everything needed to build a detector; both sketches share theta."""

    theta: int = 1024
    r: int = 4
    sr: int = 4
    a: int = 2
    g: int = 8
    k: int = 8192
    lr: int | None = None       # None: planned from (v, design_n, k)
    lc: int | None = None
    v: int = DEFAULT_V
    design_n: float = DEFAULT_DESIGN_N
    beta: float = DEFAULT_BETA
    master_seed: int = DEFAULT_MASTER_SEED
    restore_cap: int = DEFAULT_RESTORE_CAP
    addr_bits: int = 32

    def seav_config(self) -> SeavConfig:
        return SeavConfig(r=self.r, sr=self.sr, a=self.a, theta=self.theta,
                          g=self.g, addr_bits=self.addr_bits)

    def ldca_config(self) -> LdcaConfig:
        lr, lc = self.lr, self.lc
        if lr is None:
            lr, lc = plan_rows(self.v, self.design_n, self.k)
        elif lc is None:
            lc = self.v // lr
        check_noise(self.k, self.design_n, lc, lr)
        return LdcaConfig(lr=lr, lc=lc, k=self.k)


@dataclass
class DetectorState:
    seav: SeavSketch
    ldca: LdcaSketch
    window_id: int = 0
    pair_count: int = 0
    params: DetectorParams = field(default_factory=DetectorParams)

    @classmethod
    def create(cls, params: DetectorParams | None = None) -> "DetectorState":
        params = params or DetectorParams()
        seeds = SeedFamily(params.master_seed)
        seav = SeavSketch(params.seav_config(), seeds, restore_cap=params.restore_cap)
        ldca = LdcaSketch(params.ldca_config(), seeds)
        return cls(seav=seav, ldca=ldca, params=params)

    @property
    def theta(self) -> int:
        return self.seav.config.theta

    def memory_bytes(self) -> tuple[int, int]:
        return self.seav.memory_bytes(), self.ldca.memory_bytes()

    def process_pair(self, hip: int, oip: int):
        self.seav.update(hip, oip)
        self.ldca.update(hip, oip)
        self.pair_count += 1

    def process_batch(self, hips: np.ndarray, oips: np.ndarray):
        self.seav.update_batch(hips, oips)
        self.ldca.update_batch(hips, oips)
        self.pair_count += len(hips)

    def finalize_window(self, beta: float | None = None,
                        source: str = "discrete") -> list[DetectionReport]:
        """Restore candidates, keep those whose counter estimate clears
        beta * theta (or saturates), sorted by IP.

        Per-array restore overflows surface as warnings, not failures.
        """
        beta = self.params.beta if beta is None else beta
        cutoff = beta * self.theta
        reports = []
        for cand in self.seav.restore(on_overflow="warn"):
            est, saturated = self.ldca.estimate(cand.ip)
            if saturated or est >= cutoff:
                reports.append(DetectionReport(
                    ip=cand.ip,
                    estimated_cardinality=est,
                    saturated=saturated,
                    window_id=self.window_id,
                    source=source,
                ))
        return reports

    def reset(self):
        """Zero all registers for the next window; config and seeds stay."""
        self.seav.clear()
        self.ldca.clear()
        self.window_id += 1
        self.pair_count = 0


def process_pair(state: DetectorState, hip: int, oip: int) -> DetectorState:
    state.process_pair(hip, oip)
    return state


def finalize_window(state: DetectorState, theta: int | None = None,
                    beta: float = DEFAULT_BETA) -> list[DetectionReport]:
    if theta is not None and theta != state.theta:
        raise ValueError(f"detector was configured with theta={state.theta}, got {theta}")
    return state.finalize_window(beta=beta)


def reset(state: DetectorState) -> DetectorState:
    state.reset()
    return state

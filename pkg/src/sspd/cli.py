"""Operator entry point.

Subcommands: generate, detect, slide, distsim, eval, plan.  Every output
file starts with `#`-prefixed header lines echoing the resolved run
configuration, so identical invocations produce byte-identical files.

Exit codes: 0 ok, 2 configuration error, 3 data error, 4 internal assertion.
"""

from __future__ import annotations

import argparse
import sys
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from .distributed import DEFAULT_BUFFER_PAIRS, simulate_topology
from .errors import ConfigError, DataError, SspdError
from .evaluation import (
    ExactOracle,
    TraceSpec,
    generate_trace,
    ip_from_str,
    ip_to_str,
    metrics_report,
    read_trace,
    read_truth,
    truth_path,
    write_trace,
)
from .hashing import DEFAULT_MASTER_SEED
from .long_sketch import DEFAULT_DESIGN_N, DEFAULT_K, DEFAULT_V, noise_factor, plan_rows
from .short_sketch import DEFAULT_RESTORE_CAP
from .sliding import SlidingDetector
from .window_detector import DEFAULT_BETA, DetectionReport, DetectorParams, DetectorState

REPORT_COLUMNS = "window_id,ip,estimated_cardinality,saturated"
METRIC_COLUMNS = "window_id,FPR,FNR,FTR,detected,truth"


@dataclass
class RunConfig:
    """Resolved flags for one invocation."""

    seed: int = DEFAULT_MASTER_SEED
    theta: int = 1024
    beta: float = DEFAULT_BETA
    r: int = 4
    sr: int = 4
    a: int = 2
    g: int = 8
    k: int = DEFAULT_K
    v: int = DEFAULT_V
    lr: int | None = None
    lc: int | None = None
    design_n: float = DEFAULT_DESIGN_N
    window_seconds: float = 300.0
    slice_seconds: float = 1.0
    window_slices: int = 300
    detect_every: int = 1
    n_wp: int = 4
    route: str = "hash"
    buffer_pairs: int = DEFAULT_BUFFER_PAIRS
    restore_cap: int = DEFAULT_RESTORE_CAP
    threads: int = 1

    def detector_params(self) -> DetectorParams:
        return DetectorParams(
            theta=self.theta, r=self.r, sr=self.sr, a=self.a, g=self.g,
            k=self.k, lr=self.lr, lc=self.lc, v=self.v,
            design_n=self.design_n, beta=self.beta, master_seed=self.seed,
            restore_cap=self.restore_cap,
        )

    def resolved(self) -> "RunConfig":
        """Fill in planner-chosen row geometry so headers are complete."""
        if self.lr is None:
            lr, lc = plan_rows(self.v, self.design_n, self.k)
        else:
            lr = self.lr
            lc = self.lc if self.lc is not None else self.v // self.lr
        return replace(self, lr=lr, lc=lc)

    def detection_fields(self) -> dict[str, object]:
        """Fields that determine detection output (topology knobs excluded,
        so sharded and single-node runs of the same trace emit identical
        report files)."""
        c = self.resolved()
        params = c.detector_params()
        return {
            "seed": f"0x{c.seed:X}",
            "theta": c.theta,
            "beta": c.beta,
            "r": c.r,
            "sr": c.sr,
            "a": c.a,
            "g": c.g,
            "k": c.k,
            "lr": c.lr,
            "lc": c.lc,
            "design_n": f"{c.design_n:g}",
            "window_slices": c.window_slices,
            "slice_seconds": f"{c.slice_seconds:g}",
            "restore_cap": c.restore_cap,
            "seav_bytes": params.seav_config().memory_bytes(),
            "ldca_bytes": params.ldca_config().memory_bytes(),
        }

    def topology_fields(self) -> dict[str, object]:
        return {
            "n_wp": self.n_wp,
            "route": self.route,
            "buffer_pairs": self.buffer_pairs,
            "threads": self.threads,
        }


def header_lines(command: str, fields: dict[str, object]) -> list[str]:
    lines = [f"# sspd {command}"]
    lines += [f"# {key}={fields[key]}" for key in sorted(fields)]
    return lines


def format_report_row(rep: DetectionReport) -> str:
    return (f"{rep.window_id},{ip_to_str(rep.ip)},"
            f"{rep.estimated_cardinality:.6f},{int(rep.saturated)}")


def write_reports(path: Path, report_kind: str, fields: dict[str, object],
                  reports: list[DetectionReport], windows: list[int]):
    # Keyed by report kind, not subcommand: a sharded run and a single-node
    # run of the same trace must produce byte-identical files.
    lines = header_lines(f"report kind={report_kind}", fields)
    lines.append(f"# windows={' '.join(str(w) for w in windows)}")
    lines.append(REPORT_COLUMNS)
    lines += [format_report_row(r) for r in reports]
    path.write_text("\n".join(lines) + "\n")


def _add_sketch_flags(p: argparse.ArgumentParser):
    p.add_argument("--seed", type=lambda s: int(s, 0), default=DEFAULT_MASTER_SEED,
                   help="master seed (all hash roles derive from it)")
    p.add_argument("--theta", type=int, default=1024, help="super-point threshold")
    p.add_argument("--beta", type=float, default=DEFAULT_BETA,
                   help="filter slack: keep candidates with estimate >= beta*theta")
    p.add_argument("--r", type=int, default=4, help="register-array selector bits")
    p.add_argument("--sr", type=int, default=4, help="rows per register array")
    p.add_argument("--a", type=int, default=2, help="index overlap bits between rows")
    p.add_argument("--g", type=int, default=8, help="short register width in bits")
    p.add_argument("--k", type=int, default=DEFAULT_K, help="long register width in bits")
    p.add_argument("--v", type=int, default=DEFAULT_V, help="total long-register budget")
    p.add_argument("--lr", type=int, default=None, help="long rows (default: planned)")
    p.add_argument("--lc", type=int, default=None, help="long columns (default: v // lr)")
    p.add_argument("--design-n", type=float, default=DEFAULT_DESIGN_N,
                   help="expected distinct pairs per window, for the planner")
    p.add_argument("--memory-budget", type=int, default=None,
                   help="counter-array byte budget; overrides --v via v = 8*budget/k")
    p.add_argument("--window-seconds", type=float, default=300.0)
    p.add_argument("--slice-seconds", type=float, default=1.0)
    p.add_argument("--window-slices", type=int, default=None,
                   help="window length in slices (default: window-seconds/slice-seconds)")
    p.add_argument("--restore-cap", type=int, default=DEFAULT_RESTORE_CAP,
                   help="max surviving candidate tuples per register array")
    p.add_argument("--threads", type=int, default=1, help="scanner thread cap")


def _config_from_args(args: argparse.Namespace) -> RunConfig:
    v = args.v
    if args.memory_budget is not None:
        v = max(1, 8 * args.memory_budget // args.k)
    window_slices = args.window_slices
    if window_slices is None:
        window_slices = max(1, round(args.window_seconds / args.slice_seconds))
    cfg = RunConfig(
        seed=args.seed, theta=args.theta, beta=args.beta, r=args.r, sr=args.sr,
        a=args.a, g=args.g, k=args.k, v=v, lr=args.lr, lc=args.lc,
        design_n=args.design_n, window_seconds=args.window_seconds,
        slice_seconds=args.slice_seconds, window_slices=window_slices,
        detect_every=getattr(args, "detect_every", 1),
        n_wp=getattr(args, "n_wp", 4), route=getattr(args, "route", "hash"),
        buffer_pairs=getattr(args, "buffer_pairs", DEFAULT_BUFFER_PAIRS),
        restore_cap=args.restore_cap, threads=args.threads,
    )
    return cfg


def cmd_generate(args: argparse.Namespace) -> int:
    spec = TraceSpec(
        n_super=args.n_super,
        super_cardinality_range=tuple(args.super_card),
        n_background=args.n_background,
        background_cardinality_range=tuple(args.background_card),
        n_pairs=args.n_pairs,
        slices=args.slices,
        seed=args.gen_seed,
    )
    trace = generate_trace(spec)
    write_trace(trace, args.out, text=args.text)
    print(f"wrote {len(trace)} pairs to {args.out} "
          f"(+ truth sidecar {truth_path(args.out)})")
    return 0


def _detect_windows(cfg: RunConfig, trace) -> tuple[list[DetectionReport], list[int]]:
    params = cfg.detector_params()
    state = DetectorState.create(params)
    window_ids = (trace.slices.astype(np.int64) // cfg.window_slices)
    reports: list[DetectionReport] = []
    windows: list[int] = []
    for wid in np.unique(window_ids):
        sel = window_ids == wid
        hips, oips = trace.hips[sel], trace.oips[sel]
        for start in range(0, len(hips), cfg.buffer_pairs):
            state.process_batch(hips[start:start + cfg.buffer_pairs],
                                oips[start:start + cfg.buffer_pairs])
        state.window_id = int(wid)
        reports += state.finalize_window()
        windows.append(int(wid))
        state.reset()
    return reports, windows


def cmd_detect(args: argparse.Namespace) -> int:
    cfg = _config_from_args(args)
    trace = read_trace(args.trace)
    reports, windows = _detect_windows(cfg, trace)
    write_reports(Path(args.out), "discrete", cfg.detection_fields(), reports, windows)
    print(f"{len(reports)} detections across {len(windows)} window(s) -> {args.out}")
    return 0


def cmd_slide(args: argparse.Namespace) -> int:
    cfg = _config_from_args(args)
    trace = read_trace(args.trace)
    detector = SlidingDetector(cfg.detector_params(),
                               window_slices=cfg.window_slices,
                               slice_seconds=cfg.slice_seconds)
    order = np.argsort(trace.slices, kind="stable")
    slices = trace.slices[order].astype(np.int64)
    hips, oips = trace.hips[order], trace.oips[order]
    last = int(slices[-1]) if len(slices) else 0
    bounds = np.searchsorted(slices, np.arange(last + 2))
    reports: list[DetectionReport] = []
    detected_at: list[int] = []
    for s in range(last + 1):
        lo, hi = bounds[s], bounds[s + 1]
        if hi > lo:
            detector.observe_batch(hips[lo:hi], oips[lo:hi])
        if s % cfg.detect_every == 0:
            reports += detector.detect()
            detected_at.append(s)
        detector.advance_slice()
    write_reports(Path(args.out), "sliding", cfg.detection_fields(), reports, detected_at)
    print(f"{len(reports)} detections across {len(detected_at)} slide(s) -> {args.out}")
    return 0


def cmd_distsim(args: argparse.Namespace) -> int:
    cfg = _config_from_args(args)
    trace = read_trace(args.trace)
    params = cfg.detector_params()
    frames_dir = args.frames_dir
    if frames_dir is None:
        out = Path(args.out)
        frames_dir = out.with_name(out.stem + "_frames")
    results = simulate_topology(
        params, trace.slices, trace.hips, trace.oips, cfg.n_wp,
        route=cfg.route, window_slices=cfg.window_slices,
        buffer_pairs=cfg.buffer_pairs, threads=cfg.threads,
        frames_dir=frames_dir)
    reports = [r for res in results for r in res.reports]
    windows = [res.window_id for res in results]
    write_reports(Path(args.out), "discrete", cfg.detection_fields(), reports, windows)

    # Merge-equivalence assertion: a single-scanner shadow run must be
    # bit-identical to the merged global sketches.
    log_lines = header_lines("distsim", {**cfg.detection_fields(),
                                         **cfg.topology_fields()})
    ok = True
    shadow = simulate_topology(params, trace.slices, trace.hips, trace.oips,
                               1, route="round-robin",
                               window_slices=cfg.window_slices,
                               buffer_pairs=cfg.buffer_pairs)
    for res, ref in zip(results, shadow):
        seav_same = all((x == y).all() for x, y in
                        zip(res.global_seav.rows, ref.global_seav.rows))
        ldca_same = (res.global_ldca.data == ref.global_ldca.data).all()
        reports_same = res.reports == ref.reports
        ok &= seav_same and ldca_same and reports_same
        log_lines.append(
            f"window {res.window_id}: seav_identical={seav_same} "
            f"ldca_identical={ldca_same} reports_identical={reports_same}")
    Path(args.merge_log).write_text("\n".join(log_lines) + "\n")
    if not ok:
        raise AssertionError("merged sketches differ from single-scanner run")
    print(f"{len(reports)} detections across {len(windows)} window(s) -> {args.out}; "
          f"merge equivalence verified ({cfg.n_wp} watch points, {cfg.route})")
    return 0


def _read_report_csv(path: Path) -> tuple[dict[int, list[int]], list[int]]:
    per_window: dict[int, list[int]] = {}
    windows: list[int] = []
    for line in path.read_text().splitlines():
        if line.startswith("# windows="):
            windows = [int(w) for w in line.split("=", 1)[1].split()]
            continue
        if not line or line.startswith("#") or line.startswith("window_id"):
            continue
        wid, ip, _est, _sat = line.split(",")
        per_window.setdefault(int(wid), []).append(ip_from_str(ip))
    for wid in windows:
        per_window.setdefault(wid, [])
    return per_window, windows or sorted(per_window)


def cmd_eval(args: argparse.Namespace) -> int:
    per_window, windows = _read_report_csv(Path(args.reports))
    truth_map = read_truth(args.truth)
    oracle = ExactOracle.from_mapping(truth_map)
    truth = oracle.superpoints(args.theta)
    lines = header_lines("eval", {"theta": args.theta,
                                  "reports": Path(args.reports).name,
                                  "truth": Path(args.truth).name})
    lines.append(METRIC_COLUMNS)
    for wid in windows:
        rep = metrics_report(per_window.get(wid, []), truth)
        lines.append(f"{wid},{rep['fpr']:.6f},{rep['fnr']:.6f},{rep['ftr']:.6f},"
                     f"{int(rep['detected'])},{int(rep['truth'])}")
        print(f"window {wid}: FTR={rep['ftr']:.4f} "
              f"precision={rep['precision_nonpaper']:.4f} (precision is not a paper metric)")
    Path(args.out).write_text("\n".join(lines) + "\n")
    return 0


def cmd_plan(args: argparse.Namespace) -> int:
    lr, lc = plan_rows(args.v, args.n, args.k, max_rows=args.max_rows)
    factor = noise_factor(args.k, args.n, lc, lr)
    print(f"LR={lr}")
    print(f"LC={lc}")
    print(f"psu={factor / args.k:.6e}")
    print(f"psu_k={factor:.6e}")
    if factor >= 1.0:
        print("warning: psu*k >= 1, union estimates will carry noise", file=sys.stderr)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="sspd",
        description="Detect super points (hosts with >= theta distinct opposite IPs "
                    "per window) from IP-pair traces using mergeable two-tier sketches.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("generate", help="write a synthetic trace plus truth sidecar")
    p.add_argument("--out", required=True)
    p.add_argument("--n-super", type=int, default=50)
    p.add_argument("--super-card", type=int, nargs=2, default=[2048, 2048],
                   metavar=("LO", "HI"))
    p.add_argument("--n-background", type=int, default=100_000)
    p.add_argument("--background-card", type=int, nargs=2, default=[1, 8],
                   metavar=("LO", "HI"))
    p.add_argument("--n-pairs", type=int, default=1_000_000)
    p.add_argument("--slices", type=int, default=1)
    p.add_argument("--gen-seed", type=int, default=1)
    p.add_argument("--text", action="store_true", help="comma-separated text instead of binary")
    p.set_defaults(func=cmd_generate)

    p = sub.add_parser("detect", help="discrete-window detection over a trace")
    p.add_argument("--trace", required=True)
    p.add_argument("--out", required=True)
    _add_sketch_flags(p)
    p.set_defaults(func=cmd_detect)

    p = sub.add_parser("slide", help="sliding-window detection over a trace")
    p.add_argument("--trace", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--detect-every", type=int, default=1,
                   help="detection cadence in slices")
    _add_sketch_flags(p)
    p.set_defaults(func=cmd_slide)

    p = sub.add_parser("distsim", help="sharded watch-point simulation with merge")
    p.add_argument("--trace", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--n-wp", type=int, default=4)
    p.add_argument("--route", choices=["hash", "round-robin"], default="hash")
    p.add_argument("--buffer-pairs", type=int, default=DEFAULT_BUFFER_PAIRS)
    p.add_argument("--frames-dir", default=None)
    p.add_argument("--merge-log", default="merge_log.txt")
    _add_sketch_flags(p)
    p.set_defaults(func=cmd_distsim)

    p = sub.add_parser("eval", help="score a report CSV against a truth sidecar")
    p.add_argument("--reports", required=True)
    p.add_argument("--truth", required=True)
    p.add_argument("--theta", type=int, default=1024)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("plan", help="row planner: LR/LC and noise for (V, N, k)")
    p.add_argument("--v", type=int, required=True)
    p.add_argument("--n", type=float, required=True)
    p.add_argument("--k", type=int, required=True)
    p.add_argument("--max-rows", type=int, default=8)
    p.set_defaults(func=cmd_plan)
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"error: config: {exc}", file=sys.stderr)
        return 2
    except (DataError, OSError) as exc:
        print(f"error: data: {exc}", file=sys.stderr)
        return 3
    except (SspdError, AssertionError) as exc:
        print(f"error: internal: {exc}", file=sys.stderr)
        return 4


if __name__ == "__main__":
    sys.exit(main())

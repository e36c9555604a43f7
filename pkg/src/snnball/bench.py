"""Benchmark harness and closed-loop trajectory evaluation.

"Forward pass" covers the full per-window pipeline (ROI derivation, event
accumulation, network forward, decode); "inference" times the network forward
alone, so the split between system integration and compute is visible in the
reports. Timing uses the monotonic clock, one warm-up pass is excluded, and
the loop is single-threaded for stable latencies. Errors are Euclidean pixels.
"""

from __future__ import annotations

import os
import time
from dataclasses import dataclass

import numpy as np
import torch

from .decode import Detection, ErrorStats, decode, score
from .events import (
    DatasetBundle,
    Roi,
    SensorGeometry,
    accumulate,
    events_to_array,
    sample_roi,
    update_roi,
)
from .network import NetworkSpec, SpikingNet, Weights

BENCH_CSV_HEADER = (
    "profile,T,err_mean,err_std,fwd_ms_mean,fwd_ms_std,inf_ms_mean,inf_ms_std,synops,runs"
)
RUNS_CSV_HEADER = "run,err_mean,fwd_ms,inf_ms,synops"


@dataclass
class RunConfig:
    """One parsed command-line invocation."""

    command: str
    paths: dict = None  # type: ignore[assignment]
    seed: int = 0
    runs: int = 10

    READ_KEYS = ("data", "model", "config", "profile_file")

    def __post_init__(self):
        if self.paths is None:
            self.paths = {}
        if self.runs < 1:
            raise ValueError("runs must be >= 1")

    def require_read_paths(self):
        """Read commands need their input paths to exist."""
        for key in self.READ_KEYS:
            p = self.paths.get(key)
            if p is not None and not os.path.exists(p):
                raise FileNotFoundError(p)


@dataclass(frozen=True)
class BenchReport:
    profile: str
    steps: int
    err_mean: float
    err_std: float
    fwd_ms_mean: float
    fwd_ms_std: float
    inf_ms_mean: float
    inf_ms_std: float
    synops_mean: float
    runs: int


@dataclass(frozen=True)
class RunRecord:
    run: int
    err_mean: float
    fwd_ms: float
    inf_ms: float
    synops: float


def _window_chunks(bundle: DatasetBundle):
    """Pre-slice the event stream per labeled window (the benchmark times the
    per-window pipeline, not stream slicing)."""
    events = bundle.events
    t = events[:, 0] if events.shape[0] else np.empty(0, dtype=np.int64)
    chunks = []
    for i, (t0, cx, cy) in enumerate(bundle.labels):
        lo = np.searchsorted(t, t0, side="left")
        hi = np.searchsorted(t, t0 + bundle.meta.window_us, side="left")
        chunks.append((events[lo:hi], (t0, t0 + bundle.meta.window_us), (cx, cy), i))
    return chunks


def bench(spec: NetworkSpec, weights: Weights, bundle: DatasetBundle, runs: int = 10):
    """Run the full pipeline ``runs`` times over the bundle.

    Returns (BenchReport, per-run RunRecord list). Per-run times are the mean
    milliseconds per frame; the report aggregates mean and population std
    across runs.
    """
    if runs < 1:
        raise ValueError("runs must be >= 1")
    chunks = _window_chunks(bundle)
    if not chunks:
        raise ValueError("empty dataset")
    meta = bundle.meta
    net = SpikingNet(spec)
    net.load_weights(weights)
    net.eval()
    old_threads = torch.get_num_threads()
    torch.set_num_threads(1)
    records = []
    try:
        with torch.no_grad():
            # warm-up pass, excluded from statistics
            ev, window, truth, idx = chunks[0]
            roi = sample_roi(meta, truth, idx)
            net.run(accumulate(ev, roi, window).bits)
            for r in range(runs):
                fwd_s = 0.0
                inf_s = 0.0
                synops = 0.0
                dets = []
                truths = []
                for ev, window, truth, idx in chunks:
                    t0 = time.perf_counter()
                    roi = sample_roi(meta, truth, idx)
                    frame = accumulate(ev, roi, window)
                    t1 = time.perf_counter()
                    res = net.run(frame.bits)
                    t2 = time.perf_counter()
                    det = decode(res.rates[0].cpu().double().numpy(), roi)
                    t3 = time.perf_counter()
                    fwd_s += t3 - t0
                    inf_s += t2 - t1
                    synops += float(res.synops)
                    dets.append(det)
                    truths.append(truth)
                stats = score(dets, truths)
                n = len(chunks)
                records.append(
                    RunRecord(
                        run=r,
                        err_mean=stats.mean,
                        fwd_ms=fwd_s / n * 1e3,
                        inf_ms=inf_s / n * 1e3,
                        synops=synops / n,
                    )
                )
    finally:
        torch.set_num_threads(old_threads)
    report = summarize(spec, records)
    return report, records


def summarize(spec: NetworkSpec, records) -> BenchReport:
    err = np.array([r.err_mean for r in records])
    fwd = np.array([r.fwd_ms for r in records])
    inf = np.array([r.inf_ms for r in records])
    syn = np.array([r.synops for r in records])
    return BenchReport(
        profile=spec.profile_name,
        steps=spec.steps,
        err_mean=float(err.mean()),
        err_std=float(err.std()),
        fwd_ms_mean=float(fwd.mean()),
        fwd_ms_std=float(fwd.std()),
        inf_ms_mean=float(inf.mean()),
        inf_ms_std=float(inf.std()),
        synops_mean=float(syn.mean()),
        runs=len(records),
    )


def write_runs_csv(records, path) -> None:
    with open(path, "w") as fh:
        fh.write(RUNS_CSV_HEADER + "\n")
        for r in records:
            fh.write(f"{r.run},{r.err_mean!r},{r.fwd_ms!r},{r.inf_ms!r},{r.synops!r}\n")


def read_runs_csv(path):
    records = []
    with open(path) as fh:
        header = fh.readline().strip()
        if header != RUNS_CSV_HEADER:
            raise ValueError(f"{path}: unexpected header {header!r}")
        for line in fh:
            run, err, fwd, inf, syn = line.strip().split(",")
            records.append(
                RunRecord(run=int(run), err_mean=float(err), fwd_ms=float(fwd),
                          inf_ms=float(inf), synops=float(syn))
            )
    return records


def report_csv(report: BenchReport) -> str:
    return (
        f"{report.profile},{report.steps},{report.err_mean!r},{report.err_std!r},"
        f"{report.fwd_ms_mean!r},{report.fwd_ms_std!r},{report.inf_ms_mean!r},"
        f"{report.inf_ms_std!r},{report.synops_mean!r},{report.runs}"
    )


def format_table(report: BenchReport) -> str:
    rows = [
        ("profile", report.profile),
        ("steps", str(report.steps)),
        ("error [px]", f"{report.err_mean:.3f} +- {report.err_std:.3f}"),
        ("forward pass [ms]", f"{report.fwd_ms_mean:.3f} +- {report.fwd_ms_std:.3f}"),
        ("inference [ms]", f"{report.inf_ms_mean:.3f} +- {report.inf_ms_std:.3f}"),
        ("synaptic ops / frame", f"{report.synops_mean:.1f}"),
        ("runs", str(report.runs)),
    ]
    width = max(len(k) for k, _ in rows)
    return "\n".join(f"{k.ljust(width)}  {v}" for k, v in rows)


@dataclass
class TrackResult:
    detections: list
    stats: ErrorStats | None
    lost_at: int | None

    @property
    def lost(self) -> bool:
        return self.lost_at is not None


def trajectory_eval(
    spec: NetworkSpec,
    weights: Weights,
    events,
    labels,
    start_region: Roi,
    geometry: SensorGeometry,
    n_windows: int | None = None,
    window_us: int = 1000,
    lost_after: int = 5,
):
    """Closed-loop run: window 1 uses the start region, every later window
    crops around the previous decode. More than ``lost_after`` consecutive
    zero-confidence windows raise the track-lost status (and the ROI resets to
    the start region). Scored against the labels that exist.
    """
    arr = events_to_array(events)
    label_map = {t0: (cx, cy) for t0, cx, cy in labels}
    if not label_map:
        raise ValueError("no labels to evaluate against")
    t_base = min(label_map)
    if n_windows is None:
        n_windows = (max(label_map) - t_base) // window_us + 1
    if n_windows < 2:
        raise ValueError("trajectory evaluation needs at least two windows")
    t = arr[:, 0] if arr.shape[0] else np.empty(0, dtype=np.int64)
    net = SpikingNet(spec)
    net.load_weights(weights)
    net.eval()
    roi = start_region
    detections: list[Detection] = []
    scored_pred = []
    scored_true = []
    lost_at = None
    streak = 0
    for w in range(n_windows):
        t0 = t_base + w * window_us
        lo = np.searchsorted(t, t0, side="left")
        hi = np.searchsorted(t, t0 + window_us, side="left")
        frame = accumulate(arr[lo:hi], roi, (t0, t0 + window_us))
        with torch.no_grad():
            rates = net.run(frame.bits).rates[0].cpu().double().numpy()
        det = decode(rates, roi)
        detections.append(det)
        if det.lost:
            streak += 1
            if streak > lost_after and lost_at is None:
                lost_at = w
            if streak > lost_after:
                roi = start_region
        else:
            streak = 0
            roi = update_roi(det, start_region, geometry)
        if t0 in label_map:
            scored_pred.append(det)
            scored_true.append(label_map[t0])
    stats = score(scored_pred, scored_true) if scored_pred else None
    return TrackResult(detections=detections, stats=stats, lost_at=lost_at)

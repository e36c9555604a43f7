"""Synthetic labeled event streams: a ball on a ballistic track whose circle
boundary fires events, plus uniform background noise.

Generation is a pure function of (sim, noise, seed): edge events are drawn by
a counter-based hash keyed on (seed, window, pixel), background noise from a
per-window seeded generator, so windows can be produced in any order and the
stream is bit-identical across runs.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .events import (
    DEFAULT_WINDOW_US,
    DatasetBundle,
    DatasetMeta,
    SensorGeometry,
    _mix64,
)

_EDGE_FIRE = 1
_EDGE_TIME = 2
_NOISE_STREAM = 3
_TRAJ_STREAM = 4


@dataclass(frozen=True)
class BallSim:
    start: tuple[float, float]
    velocity: tuple[float, float]
    accel: tuple[float, float]
    radius: float
    geometry: SensorGeometry

    def __post_init__(self):
        if self.radius < 1:
            raise ValueError("radius must be >= 1 pixel")

    def center(self, t_s: float) -> tuple[float, float]:
        return (
            self.start[0] + self.velocity[0] * t_s + 0.5 * self.accel[0] * t_s**2,
            self.start[1] + self.velocity[1] * t_s + 0.5 * self.accel[1] * t_s**2,
        )


@dataclass(frozen=True)
class NoiseModel:
    edge_event_prob: float = 1.0
    background_rate: float = 0.0  # expected events per window per megapixel

    def __post_init__(self):
        if not 0.0 <= self.edge_event_prob <= 1.0:
            raise ValueError("edge_event_prob must lie in [0, 1]")
        if self.background_rate < 0:
            raise ValueError("background_rate must be >= 0")


def circle_edge_pixels(center, radius, geometry: SensorGeometry) -> np.ndarray:
    """Pixels whose center sits within half a pixel of the circle, clipped to
    the sensor; returns (N, 2) columns (x, y)."""
    cx, cy = center
    x0 = max(int(math.floor(cx - radius - 1)), 0)
    x1 = min(int(math.ceil(cx + radius + 1)), geometry.width - 1)
    y0 = max(int(math.floor(cy - radius - 1)), 0)
    y1 = min(int(math.ceil(cy + radius + 1)), geometry.height - 1)
    if x1 < x0 or y1 < y0:
        return np.empty((0, 2), dtype=np.int64)
    xs = np.arange(x0, x1 + 1, dtype=np.int64)
    ys = np.arange(y0, y1 + 1, dtype=np.int64)
    gx, gy = np.meshgrid(xs, ys)
    d = np.hypot(gx - cx, gy - cy)
    mask = np.abs(d - radius) <= 0.5
    return np.column_stack((gx[mask], gy[mask]))


def _hash_units(seed, window, pix, tag) -> np.ndarray:
    h = _mix64(np.uint64(seed), np.uint64(window), pix.astype(np.uint64), np.uint64(tag))
    return h.astype(np.float64) / 2.0**64


def generate(sim: BallSim, noise: NoiseModel, windows: int, seed: int,
             window_us: int = DEFAULT_WINDOW_US, t_base: int = 0):
    """Per-window events plus ground-truth centers.

    Each 1 ms window advances the ball ballistically; boundary pixels fire
    with ``edge_event_prob`` and background noise arrives at
    ``background_rate``. Ground truth is the analytic center at the window
    midpoint, rounded; windows whose center leaves the sensor get no label.
    Raises when the ball is out of frame for every window.
    """
    if windows < 1:
        raise ValueError("need at least one window")
    geo = sim.geometry
    chunks = []
    labels = []
    for w in range(windows):
        t0 = t_base + w * window_us
        # physics runs on trajectory-local time; t_base only shifts timestamps
        t_mid_s = (w + 0.5) * window_us * 1e-6
        cx, cy = sim.center(t_mid_s)
        truth = (int(round(cx)), int(round(cy)))
        rows = []
        if geo.contains(*truth):
            labels.append((t0, truth[0], truth[1]))
            edge = circle_edge_pixels((cx, cy), sim.radius, geo)
            if edge.shape[0]:
                pix = edge[:, 1] * geo.width + edge[:, 0]
                fire = _hash_units(seed, w, pix, _EDGE_FIRE) < noise.edge_event_prob
                if np.any(fire):
                    ex, ey = edge[fire, 0], edge[fire, 1]
                    et = t0 + (
                        _hash_units(seed, w, pix[fire], _EDGE_TIME) * window_us
                    ).astype(np.int64)
                    rows.append(np.column_stack((et, ex, ey, np.ones_like(ex))))
        if noise.background_rate > 0:
            rng = np.random.default_rng([seed, w, _NOISE_STREAM])
            lam = noise.background_rate * geo.width * geo.height / 1e6
            count = int(rng.poisson(lam))
            if count:
                nx = rng.integers(0, geo.width, count)
                ny = rng.integers(0, geo.height, count)
                nt = t0 + rng.integers(0, window_us, count)
                pol = rng.integers(0, 2, count)
                rows.append(np.column_stack((nt, nx, ny, pol)))
        if rows:
            chunk = np.concatenate(rows).astype(np.int64)
            chunk = chunk[np.argsort(chunk[:, 0], kind="stable")]
            chunks.append(chunk)
    if not labels:
        raise ValueError("ball out of frame for every window: empty trajectory")
    events = np.concatenate(chunks) if chunks else np.empty((0, 4), dtype=np.int64)
    return events, labels


def random_sims(n: int, geometry: SensorGeometry, seed: int,
                windows: int = 40, window_us: int = DEFAULT_WINDOW_US,
                speed: float = 400.0, radius_range=(4.0, 8.0)) -> list[BallSim]:
    """Seeded family of trajectories that stay inside the sensor for the
    configured duration."""
    rng = np.random.default_rng([seed, _TRAJ_STREAM])
    duration_s = windows * window_us * 1e-6
    sims = []
    for _ in range(n):
        r = float(rng.uniform(*radius_range))
        v = float(rng.uniform(0.5, 1.5)) * speed
        ang = float(rng.uniform(0, 2 * math.pi))
        vel = (v * math.cos(ang), v * math.sin(ang))
        acc = (0.0, float(rng.uniform(0.0, 200.0)))  # gravity-like pull
        reach_x = abs(vel[0]) * duration_s + 0.5 * abs(acc[0]) * duration_s**2
        reach_y = abs(vel[1]) * duration_s + 0.5 * abs(acc[1]) * duration_s**2
        margin_x = r + reach_x + 2
        margin_y = r + reach_y + 2
        sx = float(rng.uniform(margin_x, geometry.width - margin_x))
        sy = float(rng.uniform(margin_y, geometry.height - margin_y))
        sims.append(BallSim(start=(sx, sy), velocity=vel, accel=acc, radius=r, geometry=geometry))
    return sims


def largest_remainder_split(n: int, ratios) -> list[int]:
    """Integer split of n by the given ratios; leftovers go to the largest
    fractional remainders, ties to the later split."""
    ratios = list(ratios)
    if abs(sum(ratios) - 1.0) > 1e-9:
        raise ValueError("split ratios must sum to 1")
    if any(r < 0 for r in ratios):
        raise ValueError("split ratios must be non-negative")
    quotas = [n * r for r in ratios]
    counts = [int(math.floor(q)) for q in quotas]
    order = sorted(
        range(len(ratios)), key=lambda i: (quotas[i] - counts[i], i), reverse=True
    )
    for i in order[: n - sum(counts)]:
        counts[i] += 1
    return counts


def make_dataset(sims, noise: NoiseModel, ratios, seed: int,
                 windows: int = 40, window_us: int = DEFAULT_WINDOW_US,
                 roi_jitter: int = 16):
    """Trajectory-level train/val/test split (no trajectory spans splits).

    Returns three DatasetBundles. ROIs are jittered around the truth so the
    label position varies across the crop; the jitter is recorded in the meta
    and re-derived on load.
    """
    sims = list(sims)
    if not sims:
        raise ValueError("no trajectories")
    counts = largest_remainder_split(len(sims), ratios)
    if any(r > 0 and c == 0 for r, c in zip(ratios, counts)):
        raise ValueError(f"too few trajectories ({len(sims)}) for split {tuple(ratios)}")
    geometry = sims[0].geometry
    meta = DatasetMeta(
        geometry=geometry,
        window_us=window_us,
        roi_policy="truth_jitter" if roi_jitter > 0 else "truth",
        roi_jitter=roi_jitter,
        roi_seed=seed,
    )
    bundles = []
    start = 0
    for count in counts:
        events_parts = []
        labels: list[tuple[int, int, int]] = []
        for k in range(start, start + count):
            traj_seed = int(_mix64(np.uint64(seed), np.uint64(k)))
            ev, lb = generate(
                sims[k], noise, windows, traj_seed,
                window_us=window_us, t_base=k * windows * window_us,
            )
            events_parts.append(ev)
            labels.extend(lb)
        events = (
            np.concatenate(events_parts)
            if events_parts
            else np.empty((0, 4), dtype=np.int64)
        )
        bundles.append(DatasetBundle(events=events, labels=labels, meta=meta))
        start += count
    return tuple(bundles)

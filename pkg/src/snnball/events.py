"""Event-stream ingestion: window accumulation into binary frames, dynamic
ROI handling, and the on-disk dataset bundle format.

Frames are indexed ``bits[y, x]`` (row = sensor row). All timestamps are
integer microseconds.
"""

from __future__ import annotations

import os
from dataclasses import dataclass, field

import numpy as np

ROI_SIDE = 64
DEFAULT_WINDOW_US = 1000

EVENTS_FILE = "events.csv"
LABELS_FILE = "labels.csv"
META_FILE = "meta"
DATASET_FORMAT = 1


class ParseError(ValueError):
    """Malformed line in an event/label/meta file."""

    def __init__(self, path, line_no, message):
        super().__init__(f"{path}:{line_no}: {message}")
        self.path = str(path)
        self.line_no = line_no


@dataclass(frozen=True)
class SensorGeometry:
    width: int
    height: int

    def __post_init__(self):
        if self.width < ROI_SIDE or self.height < ROI_SIDE:
            raise ValueError(
                f"sensor must be at least {ROI_SIDE}x{ROI_SIDE}, "
                f"got {self.width}x{self.height}"
            )

    def contains(self, x, y):
        return 0 <= x < self.width and 0 <= y < self.height


@dataclass(frozen=True)
class Event:
    """One sensor event. Polarity is kept on ingest and ignored downstream."""

    t: int
    x: int
    y: int
    polarity: int = 1


def events_to_array(events) -> np.ndarray:
    """Normalize Event sequences / (N,4) arrays to an int64 (N,4) array of
    columns (t, x, y, polarity)."""
    if isinstance(events, np.ndarray):
        if events.size == 0:
            return np.empty((0, 4), dtype=np.int64)
        if events.ndim != 2 or events.shape[1] != 4:
            raise ValueError(f"event array must be (N,4), got {events.shape}")
        return events.astype(np.int64, copy=False)
    rows = [(e.t, e.x, e.y, e.polarity) for e in events]
    if not rows:
        return np.empty((0, 4), dtype=np.int64)
    return np.asarray(rows, dtype=np.int64)


@dataclass(frozen=True)
class Roi:
    """64x64 crop window. ``origin`` is the resolved top-left corner, already
    clamped inside the sensor: the rectangle is [cx-32, cx+31] x [cy-32, cy+31]
    shifted (never shrunk) at the borders."""

    center: tuple[int, int]
    origin: tuple[int, int]
    side: int = ROI_SIDE

    @classmethod
    def from_center(cls, center, geometry: SensorGeometry) -> "Roi":
        cx, cy = int(center[0]), int(center[1])
        half = ROI_SIDE // 2
        x0 = min(max(cx - half, 0), geometry.width - ROI_SIDE)
        y0 = min(max(cy - half, 0), geometry.height - ROI_SIDE)
        return cls(center=(cx, cy), origin=(x0, y0))

    def contains(self, x, y):
        x0, y0 = self.origin
        return x0 <= x < x0 + self.side and y0 <= y < y0 + self.side


@dataclass(frozen=True)
class EventFrame:
    """Binary occupancy of one accumulation window inside one ROI."""

    origin: tuple[int, int]
    bits: np.ndarray
    window: tuple[int, int]

    def __post_init__(self):
        if self.bits.shape != (ROI_SIDE, ROI_SIDE):
            raise ValueError(f"frame must be {ROI_SIDE}x{ROI_SIDE}, got {self.bits.shape}")
        self.bits.flags.writeable = False

    @property
    def size(self):
        return ROI_SIDE


def accumulate(events, roi: Roi, window: tuple[int, int]) -> EventFrame:
    """Binary-OR accumulation: a pixel is set iff at least one event with
    t_start <= t < t_end landed on it inside the ROI. Polarity is dropped.
    """
    t_start, t_end = int(window[0]), int(window[1])
    if t_end - t_start <= 0:
        raise ValueError(f"accumulation window must have positive length, got {window}")
    arr = events_to_array(events)
    bits = np.zeros((ROI_SIDE, ROI_SIDE), dtype=np.uint8)
    if arr.shape[0]:
        t, x, y = arr[:, 0], arr[:, 1], arr[:, 2]
        x0, y0 = roi.origin
        keep = (
            (t >= t_start)
            & (t < t_end)
            & (x >= x0)
            & (x < x0 + ROI_SIDE)
            & (y >= y0)
            & (y < y0 + ROI_SIDE)
        )
        bits[y[keep] - y0, x[keep] - x0] = 1
    return EventFrame(origin=roi.origin, bits=bits, window=(t_start, t_end))


def update_roi(previous, start_region: Roi, geometry: SensorGeometry) -> Roi:
    """Center the next ROI on the last known ball position, or fall back to
    the manually defined start region when there is none.

    ``previous`` may be a decode result (anything exposing ``global_xy``) or a
    plain (gx, gy) pair.
    """
    if previous is None:
        return start_region
    center = getattr(previous, "global_xy", previous)
    return Roi.from_center(center, geometry)


@dataclass(frozen=True)
class LabeledSample:
    frame: EventFrame
    truth: tuple[int, int]
    truth_local: tuple[int, int] = field(default=None)  # type: ignore[assignment]

    def __post_init__(self):
        x0, y0 = self.frame.origin
        expected = (self.truth[0] - x0, self.truth[1] - y0)
        if self.truth_local is None:
            object.__setattr__(self, "truth_local", expected)
        elif tuple(self.truth_local) != expected:
            raise ValueError(
                f"truth_local {self.truth_local} inconsistent with truth {self.truth} "
                f"and origin {self.frame.origin}"
            )
        lx, ly = self.truth_local
        if not (0 <= lx < ROI_SIDE and 0 <= ly < ROI_SIDE):
            raise ValueError(f"label {self.truth} falls outside ROI at {self.frame.origin}")


# --------------------------------------------------------------------------
# dataset bundle: directory with events.csv, labels.csv and a flat meta file
# --------------------------------------------------------------------------

ROI_POLICIES = ("truth", "truth_jitter")


@dataclass(frozen=True)
class DatasetMeta:
    geometry: SensorGeometry
    window_us: int = DEFAULT_WINDOW_US
    roi_policy: str = "truth"
    roi_jitter: int = 0
    roi_seed: int = 0

    def __post_init__(self):
        if self.roi_policy not in ROI_POLICIES:
            raise ValueError(f"unknown roi policy {self.roi_policy!r}")
        if self.window_us <= 0:
            raise ValueError("window_us must be positive")


def _mix64(*keys):
    # splitmix64-style mixing; stable across platforms and enumeration order,
    # broadcasts over array keys
    h = np.uint64(0x9E3779B97F4A7C15)
    with np.errstate(over="ignore"):
        for k in keys:
            k = np.asarray(k, dtype=np.uint64)
            h = h ^ (k + np.uint64(0x9E3779B97F4A7C15))
            h = (h ^ (h >> np.uint64(30))) * np.uint64(0xBF58476D1CE4E5B9)
            h = (h ^ (h >> np.uint64(27))) * np.uint64(0x94D049BB133111EB)
            h = h ^ (h >> np.uint64(31))
    return h


def hash_unit(*keys) -> float:
    """Deterministic uniform in [0, 1) keyed by the integer arguments."""
    return float(_mix64(*keys)) / 2.0**64


def sample_roi(meta: DatasetMeta, truth, index: int) -> Roi:
    """Derive the ROI for sample ``index`` from the bundle's recorded policy.

    Deterministic in (policy, jitter bound, seed, index, truth), so frames can
    be reconstructed from events + labels alone.
    """
    cx, cy = int(truth[0]), int(truth[1])
    if meta.roi_policy == "truth_jitter" and meta.roi_jitter > 0:
        span = 2 * meta.roi_jitter + 1
        cx += int(hash_unit(meta.roi_seed, index, 0) * span) - meta.roi_jitter
        cy += int(hash_unit(meta.roi_seed, index, 1) * span) - meta.roi_jitter
    return Roi.from_center((cx, cy), meta.geometry)


def write_events_csv(path, events) -> None:
    arr = events_to_array(events)
    with open(path, "w") as fh:
        for t, x, y, p in arr:
            fh.write(f"{t},{x},{y},{p}\n")


def read_events_csv(path) -> np.ndarray:
    rows = []
    with open(path) as fh:
        for line_no, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            parts = line.split(",")
            if len(parts) != 4:
                raise ParseError(path, line_no, f"expected t_us,x,y,p got {line!r}")
            try:
                t, x, y, p = (int(v) for v in parts)
            except ValueError:
                raise ParseError(path, line_no, f"non-integer field in {line!r}") from None
            if p not in (0, 1):
                raise ParseError(path, line_no, f"polarity must be 0 or 1, got {p}")
            rows.append((t, x, y, p))
    if not rows:
        return np.empty((0, 4), dtype=np.int64)
    arr = np.asarray(rows, dtype=np.int64)
    if np.any(np.diff(arr[:, 0]) < 0):
        bad = int(np.argmax(np.diff(arr[:, 0]) < 0)) + 2
        raise ParseError(path, bad, "timestamps must be non-decreasing")
    return arr


def write_labels_csv(path, labels) -> None:
    with open(path, "w") as fh:
        for t, cx, cy in labels:
            fh.write(f"{int(t)},{int(cx)},{int(cy)}\n")


def read_labels_csv(path) -> list[tuple[int, int, int]]:
    out = []
    with open(path) as fh:
        for line_no, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            parts = line.split(",")
            if len(parts) != 3:
                raise ParseError(path, line_no, f"expected t_us,cx,cy got {line!r}")
            try:
                out.append(tuple(int(v) for v in parts))
            except ValueError:
                raise ParseError(path, line_no, f"non-integer field in {line!r}") from None
    return out


def write_meta(path, meta: DatasetMeta) -> None:
    with open(path, "w") as fh:
        fh.write(f"format {DATASET_FORMAT}\n")
        fh.write(f"sensor_width {meta.geometry.width}\n")
        fh.write(f"sensor_height {meta.geometry.height}\n")
        fh.write(f"window_us {meta.window_us}\n")
        fh.write(f"roi_policy {meta.roi_policy}\n")
        fh.write(f"roi_jitter {meta.roi_jitter}\n")
        fh.write(f"roi_seed {meta.roi_seed}\n")


def read_meta(path) -> DatasetMeta:
    values = {}
    with open(path) as fh:
        for line_no, line in enumerate(fh, start=1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            parts = line.split(None, 1)
            if len(parts) != 2:
                raise ParseError(path, line_no, f"expected 'key value', got {line!r}")
            values[parts[0]] = parts[1]
    try:
        geometry = SensorGeometry(int(values["sensor_width"]), int(values["sensor_height"]))
        return DatasetMeta(
            geometry=geometry,
            window_us=int(values.get("window_us", DEFAULT_WINDOW_US)),
            roi_policy=values.get("roi_policy", "truth"),
            roi_jitter=int(values.get("roi_jitter", 0)),
            roi_seed=int(values.get("roi_seed", 0)),
        )
    except KeyError as exc:
        raise ParseError(path, 0, f"missing meta key {exc}") from None


@dataclass
class DatasetBundle:
    """In-memory form of one dataset directory."""

    events: np.ndarray
    labels: list[tuple[int, int, int]]
    meta: DatasetMeta

    def samples(self) -> list[LabeledSample]:
        out = []
        for i, (t_us, cx, cy) in enumerate(self.labels):
            roi = sample_roi(self.meta, (cx, cy), i)
            frame = accumulate(self.events, roi, (t_us, t_us + self.meta.window_us))
            out.append(LabeledSample(frame=frame, truth=(cx, cy)))
        return out

    def save(self, path) -> None:
        os.makedirs(path, exist_ok=True)
        write_events_csv(os.path.join(path, EVENTS_FILE), self.events)
        write_labels_csv(os.path.join(path, LABELS_FILE), self.labels)
        write_meta(os.path.join(path, META_FILE), self.meta)

    @classmethod
    def load(cls, path) -> "DatasetBundle":
        meta = read_meta(os.path.join(path, META_FILE))
        events = read_events_csv(os.path.join(path, EVENTS_FILE))
        labels = read_labels_csv(os.path.join(path, LABELS_FILE))
        return cls(events=events, labels=labels, meta=meta)


def load_dataset(path) -> list[LabeledSample]:
    return DatasetBundle.load(path).samples()


def save_dataset(samples, path, meta: DatasetMeta) -> None:
    """Persist labeled frames as a bundle. One event per set bit is emitted at
    the window start; the declared ROI policy must reproduce each sample's
    origin, otherwise reloading could not round-trip. Sample windows must not
    overlap (one label per accumulation window, as the generator produces).
    """
    events = []
    labels = []
    for i, s in enumerate(samples):
        roi = sample_roi(meta, s.truth, i)
        if roi.origin != s.frame.origin:
            raise ValueError(
                f"sample {i}: origin {s.frame.origin} not reproduced by roi policy "
                f"{meta.roi_policy!r} (derived {roi.origin})"
            )
        t0 = s.frame.window[0]
        ys, xs = np.nonzero(s.frame.bits)
        x0, y0 = s.frame.origin
        for yy, xx in sorted(zip(ys.tolist(), xs.tolist())):
            events.append((t0, x0 + xx, y0 + yy, 1))
        labels.append((t0, s.truth[0], s.truth[1]))
    arr = (
        np.asarray(events, dtype=np.int64)
        if events
        else np.empty((0, 4), dtype=np.int64)
    )
    if arr.shape[0]:
        arr = arr[np.argsort(arr[:, 0], kind="stable")]
    DatasetBundle(events=arr, labels=labels, meta=meta).save(path)

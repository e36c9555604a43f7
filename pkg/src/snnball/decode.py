"""Population decoding of the 128 output rates into a 2D detection, and
pixel-error scoring.

The first 64 outputs vote for the x position, the last 64 for y; the decoded
coordinate is the argmax within each population (ties go to the lowest index).
Reported errors are Euclidean pixel distances with the population standard
deviation (divide by N).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .events import ROI_SIDE, Roi


@dataclass(frozen=True)
class Detection:
    local: tuple[int, int]
    global_xy: tuple[int, int]
    confidence: tuple[float, float]

    @property
    def lost(self) -> bool:
        # all-zero output decodes to (0, 0) with zero confidence
        return self.confidence[0] <= 0.0 and self.confidence[1] <= 0.0


@dataclass(frozen=True)
class ErrorStats:
    mean: float
    stddev: float
    count: int


def decode(output, roi: Roi) -> Detection:
    out = np.asarray(output, dtype=np.float64).reshape(-1)
    if out.shape != (2 * ROI_SIDE,):
        raise ValueError(f"expected {2 * ROI_SIDE} output rates, got {out.shape}")
    if not np.all(np.isfinite(out)):
        raise ValueError("non-finite network output")
    xs, ys = out[:ROI_SIDE], out[ROI_SIDE:]
    lx = int(np.argmax(xs))
    ly = int(np.argmax(ys))
    x0, y0 = roi.origin
    return Detection(
        local=(lx, ly),
        global_xy=(x0 + lx, y0 + ly),
        confidence=(float(xs[lx]), float(ys[ly])),
    )


def _as_points(seq) -> np.ndarray:
    pts = []
    for item in seq:
        if isinstance(item, Detection):
            pts.append(item.global_xy)
        else:
            pts.append((item[0], item[1]))
    return np.asarray(pts, dtype=np.float64).reshape(-1, 2)


def score(detections, truths) -> ErrorStats:
    """Euclidean pixel error between aligned detection/truth sequences."""
    pred = _as_points(detections)
    true = _as_points(truths)
    if pred.shape != true.shape:
        raise ValueError(f"length mismatch: {pred.shape[0]} detections vs {true.shape[0]} truths")
    if pred.shape[0] == 0:
        raise ValueError("nothing to score")
    d = np.hypot(pred[:, 0] - true[:, 0], pred[:, 1] - true[:, 1])
    return ErrorStats(mean=float(d.mean()), stddev=float(d.std()), count=int(d.size))

"""Scikit-learn style front-end: fit on labeled 64x64 binary frames, predict
(x, y) pixel positions."""

from __future__ import annotations

from dataclasses import replace

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.exceptions import NotFittedError

from .events import EventFrame, LabeledSample
from .network import QUANTIZED_RELU, batch_rates, build_profile
from .training import TrainConfig, train_bptt, train_qat
from .validation import check_frames, check_positions


def samples_from_arrays(X, y) -> list[LabeledSample]:
    """Wrap (n, 64, 64) frames and (n, 2) local positions as labeled samples
    anchored at sensor origin (0, 0)."""
    X = check_frames(X)
    y = check_positions(y, X.shape[0])
    out = []
    for i in range(X.shape[0]):
        frame = EventFrame(origin=(0, 0), bits=X[i].copy(), window=(i * 1000, (i + 1) * 1000))
        out.append(LabeledSample(frame=frame, truth=(int(y[i, 0]), int(y[i, 1]))))
    return out


class SpikingBallDetector(BaseEstimator):
    """Trainable spiking detector over binary event frames.

    Parameters mirror the training configuration; ``learning_rate`` and
    ``batch_size`` default to the chosen profile's values when left None.
    ``score`` returns the negative mean Euclidean pixel error (greater is
    better, sklearn convention).
    """

    def __init__(
        self,
        profile: str = "sinabs_like",
        epochs: int = 20,
        learning_rate: float | None = None,
        batch_size: int | None = None,
        steps: int | None = None,
        lambda_synops: float = 1e-6,
        lambda_weightmax: float = 1e-3,
        gamma: float = 0.5,
        weight_bits: int = 8,
        seed: int = 0,
        dtype: str = "float32",
    ):
        self.profile = profile
        self.epochs = epochs
        self.learning_rate = learning_rate
        self.batch_size = batch_size
        self.steps = steps
        self.lambda_synops = lambda_synops
        self.lambda_weightmax = lambda_weightmax
        self.gamma = gamma
        self.weight_bits = weight_bits
        self.seed = seed
        self.dtype = dtype

    def _config(self) -> TrainConfig:
        overrides = dict(
            epochs=self.epochs,
            lambda_synops=self.lambda_synops,
            lambda_weightmax=self.lambda_weightmax,
            gamma=self.gamma,
            weight_bits=self.weight_bits,
            seed=self.seed,
            dtype=self.dtype,
        )
        if self.learning_rate is not None:
            overrides["learning_rate"] = self.learning_rate
        if self.batch_size is not None:
            overrides["batch_size"] = self.batch_size
        return TrainConfig.for_profile(self.profile, **overrides)

    def fit(self, X, y):
        samples = samples_from_arrays(X, y)
        spec = build_profile(self.profile)
        if self.steps is not None:
            spec = replace(spec, steps=int(self.steps))
        trainer = (
            train_qat
            if any(l.activation == QUANTIZED_RELU for l in spec.layers)
            else train_bptt
        )
        weights, history = trainer(spec, samples, self._config())
        self.spec_ = spec
        self.weights_ = weights
        self.history_ = history
        return self

    def _check_fitted(self):
        if not hasattr(self, "weights_"):
            raise NotFittedError("call fit before predict/score")

    def predict(self, X) -> np.ndarray:
        """Per-frame (x, y) local pixel coordinates, shape (n, 2)."""
        self._check_fitted()
        X = check_frames(X)
        rates = batch_rates(self.spec_, self.weights_, X.astype(np.float64))
        half = rates.shape[1] // 2
        lx = rates[:, :half].argmax(axis=1)
        ly = rates[:, half:].argmax(axis=1)
        return np.column_stack((lx, ly)).astype(np.int64)

    def score(self, X, y) -> float:
        self._check_fitted()
        y = check_positions(y, check_frames(X).shape[0])
        pred = self.predict(X)
        err = np.hypot(*(pred - y).T.astype(np.float64))
        return -float(err.mean())

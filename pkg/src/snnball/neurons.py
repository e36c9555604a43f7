"""Discrete-time neuron update rules.

Three dynamics are supported: integrate-and-fire with multi-spike output
(spike count proportional to how far the membrane sits above threshold),
single-spike leaky integrate-and-fire, and a step-wise quantized ReLU that
stands in for rate coding squashed into one time step.

Resets subtract the threshold by default: that choice makes spike count times
threshold plus residual membrane exactly equal the integrated input, which in
turn makes the rate code an exact ReLU for inputs quantized to 1/T.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

IF_MULTISPIKE = "if_multispike"
LIF_SINGLE = "lif_single"
QUANTIZED_RELU = "quantized_relu"
MODES = (IF_MULTISPIKE, LIF_SINGLE, QUANTIZED_RELU)

RESET_SUBTRACT = "subtract"
RESET_ZERO = "zero"

# spike trains are (T, ...) arrays of non-negative per-step counts, at most 1
# in single-spike modes
SpikeTensor = np.ndarray


def check_spike_tensor(spikes, single_spike: bool = False) -> np.ndarray:
    spikes = np.asarray(spikes)
    if spikes.ndim < 1 or spikes.shape[0] < 1:
        raise ValueError("spike tensor needs a leading time axis")
    if np.any(spikes < 0) or np.any(spikes != np.floor(spikes)):
        raise ValueError("spike counts must be non-negative integers")
    if single_spike and np.any(spikes > 1):
        raise ValueError("single-spike mode emits at most one spike per step")
    return spikes


@dataclass
class NeuronState:
    """Per-layer membrane state evolved over discrete time steps."""

    membrane: np.ndarray
    threshold: float = 1.0
    decay: float = 0.0
    mode: str = IF_MULTISPIKE
    reset: str = RESET_SUBTRACT

    def __post_init__(self):
        self.membrane = np.asarray(self.membrane, dtype=np.float64)
        if self.threshold <= 0:
            raise ValueError("threshold must be positive")
        if not 0.0 <= self.decay < 1.0:
            raise ValueError("decay must lie in [0, 1)")
        if self.mode not in MODES:
            raise ValueError(f"unknown mode {self.mode!r}")
        if self.reset not in (RESET_SUBTRACT, RESET_ZERO):
            raise ValueError(f"unknown reset {self.reset!r}")

    @classmethod
    def zeros(cls, n, **kwargs):
        return cls(membrane=np.zeros(n), **kwargs)


def _check_finite(x):
    if not np.all(np.isfinite(x)):
        raise ValueError("non-finite input to neuron update")


def step_if_multispike(state: NeuronState, inputs) -> np.ndarray:
    """Integrate, then emit floor(v / threshold) spikes wherever v crossed it.

    Returns the per-neuron spike counts (non-negative integers).
    """
    if state.mode != IF_MULTISPIKE:
        raise ValueError(f"state mode is {state.mode!r}, expected {IF_MULTISPIKE!r}")
    inputs = np.asarray(inputs, dtype=np.float64)
    _check_finite(inputs)
    v = state.membrane + inputs
    n = np.maximum(np.floor(v / state.threshold), 0.0)
    if state.reset == RESET_SUBTRACT:
        v = v - n * state.threshold
    else:
        v = np.where(n > 0, 0.0, v)
    state.membrane = v
    return n.astype(np.int64)


def step_lif(state: NeuronState, inputs) -> np.ndarray:
    """Decay the membrane, integrate, and emit at most one spike per neuron."""
    if state.mode != LIF_SINGLE:
        raise ValueError(f"state mode is {state.mode!r}, expected {LIF_SINGLE!r}")
    inputs = np.asarray(inputs, dtype=np.float64)
    _check_finite(inputs)
    v = (1.0 - state.decay) * state.membrane + inputs
    s = (v >= state.threshold).astype(np.int64)
    if state.reset == RESET_SUBTRACT:
        v = v - s * state.threshold
    else:
        v = np.where(s > 0, 0.0, v)
    state.membrane = v
    return s


def quantized_relu(x, bits: int, range_max: float) -> np.ndarray:
    """Clamp to [0, range_max] and round to the nearest of 2**bits uniform
    levels spanning that range."""
    if bits < 1:
        raise ValueError("bits must be >= 1")
    if range_max <= 0:
        raise ValueError("range_max must be positive")
    x = np.asarray(x, dtype=np.float64)
    step = range_max / (2**bits - 1)
    y = np.clip(x, 0.0, range_max)
    return np.round(y / step) * step


def rate(spikes) -> np.ndarray:
    """Per-neuron spike count divided by the number of time steps.

    ``spikes`` is (T, ...) with the step axis first.
    """
    spikes = np.asarray(spikes, dtype=np.float64)
    if spikes.ndim < 1 or spikes.shape[0] < 1:
        raise ValueError("need at least one time step")
    return spikes.sum(axis=0) / spikes.shape[0]


def run_steps(state: NeuronState, inputs_per_step) -> np.ndarray:
    """Drive one state through a (T, n) input sequence; returns (T, n) spikes."""
    step = step_if_multispike if state.mode == IF_MULTISPIKE else step_lif
    return np.stack([step(state, x) for x in np.asarray(inputs_per_step, dtype=np.float64)])

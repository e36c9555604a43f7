"""Surrogate-gradient training.

Spiking stacks are unrolled over their time steps and trained with
backprop-through-time, substituting a periodic exponential surrogate for the
Heaviside derivative. The quantized-ReLU stack trains quantization-aware with
straight-through estimators and full-precision shadow weights. Both paths use
Adam and an MSE loss against a population-coded target, optionally regularized
by the synaptic-operation count and the per-layer absolute weight maximum.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np
import torch

from .events import ROI_SIDE
from .network import (
    IF_MULTISPIKE,
    LIF_SINGLE,
    QUANTIZED_RELU,
    WEIGHTED_KINDS,
    ForwardTrace,
    NetworkSpec,
    SpikingNet,
    Weights,
)

POPULATION = ROI_SIDE  # 64 neurons per coordinate population

# targets are 128-vectors: x population in [0..63], y population in [64..127]
TargetVector = np.ndarray


class TrainingDiverged(RuntimeError):
    def __init__(self, epoch):
        super().__init__(f"non-finite loss at epoch {epoch}")
        self.epoch = epoch


def encode_target(lx: int, ly: int) -> np.ndarray:
    """128-value target: 1.0 at the true coordinate's neuron, 0.5 at its
    in-range neighbors, 0 elsewhere, per population. Border neighbors are
    dropped, not renormalized."""
    if not (0 <= lx < POPULATION and 0 <= ly < POPULATION):
        raise ValueError(f"coordinate ({lx}, {ly}) outside 0..{POPULATION - 1}")
    t = np.zeros(2 * POPULATION, dtype=np.float64)
    for base, c in ((0, int(lx)), (POPULATION, int(ly))):
        t[base + c] = 1.0
        if c > 0:
            t[base + c - 1] = 0.5
        if c < POPULATION - 1:
            t[base + c + 1] = 0.5
    return t


def surrogate_grad(v, theta: float = 1.0, gamma: float = 0.5, periodic: bool = True):
    """Surrogate derivative of the spike count w.r.t. the membrane potential:
    exponential decay with width gamma around each threshold multiple
    (periodic, multi-spike) or around the single threshold."""
    if gamma <= 0:
        raise ValueError("gamma must be positive")
    if theta <= 0:
        raise ValueError("theta must be positive")
    v = np.asarray(v, dtype=np.float64)
    if periodic:
        k = np.maximum(np.round(v / theta), 1.0)
    else:
        k = 1.0
    return np.exp(-np.abs(v - k * theta) / gamma) / gamma


@dataclass(frozen=True)
class LossBreakdown:
    mse: float
    synops_penalty: float
    weightmax_penalty: float
    total: float


@dataclass
class TrainConfig:
    profile: str = "custom"
    learning_rate: float = 1e-4
    batch_size: int = 32
    epochs: int = 20
    lambda_synops: float = 1e-6
    lambda_weightmax: float = 1e-3
    gamma: float = 0.5
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    seed: int = 0
    weight_bits: int = 8
    dtype: str = "float32"

    # per-framework defaults (lr / batch)
    _PROFILE_DEFAULTS = {
        "sinabs_like": (1e-4, 200),
        "lava_like": (1e-3, 100),
        "metatf_like": (1e-4, 1000),
    }

    def __post_init__(self):
        if self.learning_rate < 0 or self.batch_size < 1 or self.epochs < 0:
            raise ValueError("bad learning_rate/batch_size/epochs")
        if self.lambda_synops < 0 or self.lambda_weightmax < 0:
            raise ValueError("loss weights must be >= 0")
        if self.gamma <= 0:
            raise ValueError("gamma must be positive")
        if self.dtype not in ("float32", "float64"):
            raise ValueError("dtype must be float32 or float64")

    @classmethod
    def for_profile(cls, profile: str, **overrides) -> "TrainConfig":
        lr, batch = cls._PROFILE_DEFAULTS.get(profile, (1e-4, 32))
        base = dict(profile=profile, learning_rate=lr, batch_size=batch)
        base.update(overrides)
        return cls(**base)


def weightmax_penalty(weights: Weights) -> float:
    return float(
        sum(np.abs(lw.weight).max() for lw in weights.layers if lw.weight is not None)
    )


def loss(
    output,
    target,
    trace: ForwardTrace,
    weights: Weights,
    lambda_synops: float = 1e-6,
    lambda_weightmax: float = 1e-3,
    batch_size: int = 1,
) -> LossBreakdown:
    """Single-sample loss breakdown: mean squared error over the 128 outputs,
    plus the synaptic-op and weight-maximum penalties."""
    output = np.asarray(output, dtype=np.float64)
    target = np.asarray(target, dtype=np.float64)
    if output.shape != target.shape:
        raise ValueError(f"shape mismatch {output.shape} vs {target.shape}")
    if not (np.all(np.isfinite(output)) and np.all(np.isfinite(target))):
        raise ValueError("non-finite loss inputs")
    mse = float(np.mean((output - target) ** 2))
    synp = float(trace.synaptic_ops) / batch_size
    wm = weightmax_penalty(weights)
    return LossBreakdown(
        mse=mse,
        synops_penalty=synp,
        weightmax_penalty=wm,
        total=mse + lambda_synops * synp + lambda_weightmax * wm,
    )


def _prepare(data, dtype):
    frames = np.stack([np.asarray(s.frame.bits, dtype=np.float64) for s in data])
    targets = np.stack([encode_target(*s.truth_local) for s in data])
    return (
        torch.as_tensor(frames, dtype=dtype),
        torch.as_tensor(targets, dtype=dtype),
    )


def _spiking_spec(spec: NetworkSpec) -> bool:
    acts = {l.activation for l in spec.layers if l.activation}
    return bool(acts & {IF_MULTISPIKE, LIF_SINGLE}) and QUANTIZED_RELU not in acts


def train_bptt(spec: NetworkSpec, data, config: TrainConfig, epoch_callback=None,
               initial: Weights | None = None):
    """Backprop-through-time with surrogate gradients for the spiking stacks.

    Returns (trained Weights, per-epoch LossBreakdown history). The optional
    ``epoch_callback(epoch, breakdown, net)`` runs after each epoch and stops
    training early when it returns truthy; ``initial`` warm-starts from
    existing weights instead of a fresh init (regularizers in particular are
    meant to shape an already-spiking network, not a cold one: a silent net's
    synops/weight penalties would dominate its only wake-up gradients).
    """
    if not _spiking_spec(spec):
        raise ValueError("train_bptt expects a spiking (IF/LIF) stack")
    return _train(spec, data, config, qat=False, epoch_callback=epoch_callback,
                  initial=initial)


def train_qat(spec: NetworkSpec, data, config: TrainConfig, epoch_callback=None,
              initial: Weights | None = None):
    """Quantization-aware training for the quantized-ReLU stack. Activations
    quantize in the forward pass (straight-through backward); Adam updates
    full-precision shadow weights; the returned deployment set has batchnorm
    folded and weights on the symmetric per-layer grid of ``weight_bits``."""
    if _spiking_spec(spec) or not any(l.activation == QUANTIZED_RELU for l in spec.layers):
        raise ValueError("train_qat expects a quantized-ReLU stack")
    return _train(spec, data, config, qat=True, epoch_callback=epoch_callback,
                  initial=initial)


def _train(spec, data, config, qat, epoch_callback=None, initial=None):
    data = list(data)
    if not data:
        raise ValueError("empty training set")
    spec = replace(spec, gamma=config.gamma)
    dtype = torch.float64 if config.dtype == "float64" else torch.float32
    torch.manual_seed(config.seed)
    net = SpikingNet(spec, dtype=dtype, seed=config.seed)
    if initial is not None:
        net.load_weights(initial)
    net.train()
    if qat:
        net.qat_weight_bits = config.weight_bits
        net._track_ranges = True
    opt = torch.optim.Adam(
        net.parameters(),
        lr=config.learning_rate,
        betas=(config.beta1, config.beta2),
        eps=config.eps,
    )
    X, Y = _prepare(data, dtype)
    n = X.shape[0]
    has_bn = any(l.batchnorm for l in spec.layers)
    if has_bn and n < 2:
        raise ValueError("batchnorm training needs at least 2 samples per batch")
    rng = np.random.default_rng(config.seed)
    weighted = [i for i, l in enumerate(spec.layers) if l.kind in WEIGHTED_KINDS]
    history: list[LossBreakdown] = []
    for epoch in range(config.epochs):
        order = rng.permutation(n)
        bounds = list(range(0, n, config.batch_size)) + [n]
        if has_bn and len(bounds) > 2 and bounds[-1] - bounds[-2] == 1:
            del bounds[-2]  # batchnorm cannot train on a size-1 tail batch
        sums = np.zeros(3)
        batches = 0
        for lo, hi in zip(bounds[:-1], bounds[1:]):
            idx = torch.as_tensor(order[lo:hi])
            res = net.run(X[idx])
            mse = ((res.rates - Y[idx]) ** 2).mean()
            synp = res.synops / idx.shape[0]
            wm = sum(net.ops[i].weight.abs().max() for i in weighted)
            total = mse + config.lambda_synops * synp + config.lambda_weightmax * wm
            if not torch.isfinite(total):
                raise TrainingDiverged(epoch)
            opt.zero_grad()
            total.backward()
            opt.step()
            sums += (mse.item(), synp.item(), wm.item())
            batches += 1
        mse_e, synp_e, wm_e = sums / max(batches, 1)
        breakdown = LossBreakdown(
            mse=mse_e,
            synops_penalty=synp_e,
            weightmax_penalty=wm_e,
            total=mse_e + config.lambda_synops * synp_e + config.lambda_weightmax * wm_e,
        )
        history.append(breakdown)
        if epoch_callback is not None and epoch_callback(epoch, breakdown, net):
            break
    net.eval()
    if qat:
        from .deploy import quantize_weights

        folded = net.export_folded_weights()
        weights, _ = quantize_weights(folded, config.weight_bits)
    else:
        weights = net.export_weights()
    return weights, history


def write_history_csv(history, path) -> None:
    with open(path, "w") as fh:
        fh.write("epoch,mse,synops,weightmax,total\n")
        for i, h in enumerate(history):
            fh.write(f"{i},{h.mse!r},{h.synops_penalty!r},{h.weightmax_penalty!r},{h.total!r}\n")


def read_train_config(path) -> TrainConfig:
    """Flat key-value training config file (lr, batch, epochs, lambda_synops,
    lambda_weightmax, gamma, seed, profile)."""
    values = {}
    with open(path) as fh:
        for line in fh:
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            key, _, val = line.partition(" ")
            values[key] = val.strip()
    profile = values.get("profile", "custom")
    overrides = {}
    for key, attr, conv in (
        ("lr", "learning_rate", float),
        ("batch", "batch_size", int),
        ("epochs", "epochs", int),
        ("lambda_synops", "lambda_synops", float),
        ("lambda_weightmax", "lambda_weightmax", float),
        ("gamma", "gamma", float),
        ("seed", "seed", int),
        ("weight_bits", "weight_bits", int),
        ("dtype", "dtype", str),
    ):
        if key in values:
            overrides[attr] = conv(values[key])
    return TrainConfig.for_profile(profile, **overrides)


def write_train_config(config: TrainConfig, path) -> None:
    with open(path, "w") as fh:
        fh.write(f"profile {config.profile}\n")
        fh.write(f"lr {config.learning_rate!r}\n")
        fh.write(f"batch {config.batch_size}\n")
        fh.write(f"epochs {config.epochs}\n")
        fh.write(f"lambda_synops {config.lambda_synops!r}\n")
        fh.write(f"lambda_weightmax {config.lambda_weightmax!r}\n")
        fh.write(f"gamma {config.gamma!r}\n")
        fh.write(f"seed {config.seed}\n")
        fh.write(f"weight_bits {config.weight_bits}\n")
        fh.write(f"dtype {config.dtype}\n")

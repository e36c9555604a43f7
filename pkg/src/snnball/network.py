"""Declarative layer stacks (conv / pool / linear) executed over discrete time
steps with pluggable neuron dynamics, plus the three deployable architecture
profiles and the model file format.

The torch runtime here is the trainable path; tests hold an independent
step-by-step simulator it is checked against.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import torch

from .neurons import IF_MULTISPIKE, LIF_SINGLE, QUANTIZED_RELU, RESET_SUBTRACT, RESET_ZERO

CONV2D = "conv2d"
AVGPOOL = "avgpool"
MAXPOOL = "maxpool"
LINEAR = "linear"
LAYER_KINDS = (CONV2D, AVGPOOL, MAXPOOL, LINEAR)
WEIGHTED_KINDS = (CONV2D, LINEAR)
POOLING_KINDS = (AVGPOOL, MAXPOOL)

PROFILES = ("sinabs_like", "metatf_like", "lava_like")
MODEL_FORMAT = 1


class SpecError(ValueError):
    """Inconsistent or unsupported network specification."""


@dataclass(frozen=True)
class LayerSpec:
    kind: str
    out_channels: int = 0
    kernel: tuple[int, int] = (2, 2)
    stride: int = 1
    has_bias: bool = False
    batchnorm: bool = False
    activation: str | None = None

    def __post_init__(self):
        if self.kind not in LAYER_KINDS:
            raise SpecError(f"unknown layer kind {self.kind!r}")
        if self.stride < 1:
            raise SpecError("stride must be >= 1")
        if self.kernel[0] < 1 or self.kernel[1] < 1:
            raise SpecError("kernel dims must be >= 1")
        if self.kind in POOLING_KINDS and (self.has_bias or self.batchnorm or self.activation):
            raise SpecError("pooling layers carry no weights, batchnorm or activation")
        if self.kind in WEIGHTED_KINDS and self.out_channels < 1:
            raise SpecError("weighted layers need out_channels >= 1")


def conv(out_channels, kernel, stride=1, bias=False, batchnorm=False, activation=None):
    return LayerSpec(CONV2D, out_channels, kernel, stride, bias, batchnorm, activation)


def linear(out_features, bias=False, batchnorm=False, activation=None):
    return LayerSpec(LINEAR, out_features, (1, 1), 1, bias, batchnorm, activation)


def avgpool(size=2):
    return LayerSpec(AVGPOOL, kernel=(size, size), stride=size)


def maxpool(size=2):
    return LayerSpec(MAXPOOL, kernel=(size, size), stride=size)


@dataclass(frozen=True)
class NetworkSpec:
    layers: tuple[LayerSpec, ...]
    steps: int
    profile_name: str = "custom"
    input_shape: tuple[int, int, int] = (1, 64, 64)
    threshold: float = 1.0
    decay: float = 0.0
    gamma: float = 0.5
    act_bits: int | None = None
    reset: str = RESET_SUBTRACT

    def __post_init__(self):
        object.__setattr__(self, "layers", tuple(self.layers))


def shape_chain(spec: NetworkSpec) -> list[tuple]:
    """Per-layer output shapes under valid (no-padding) arithmetic.

    Raises SpecError when the stack does not chain.
    """
    shapes: list[tuple] = [tuple(spec.input_shape)]
    cur = tuple(spec.input_shape)
    for i, layer in enumerate(spec.layers):
        if layer.kind == LINEAR:
            feats = cur[0] if len(cur) == 1 else int(np.prod(cur))
            cur = (layer.out_channels,)
            shapes.append(cur)
            continue
        if len(cur) != 3:
            raise SpecError(f"layer {i}: {layer.kind} cannot follow a flattened stage")
        c, h, w = cur
        kh, kw = layer.kernel
        if layer.kind == CONV2D:
            if h < kh or w < kw:
                raise SpecError(f"layer {i}: kernel {layer.kernel} larger than input {h}x{w}")
            cur = (layer.out_channels, (h - kh) // layer.stride + 1, (w - kw) // layer.stride + 1)
        else:  # pooling, floor mode
            if h < kh or w < kw:
                raise SpecError(f"layer {i}: pool {layer.kernel} larger than input {h}x{w}")
            cur = (c, h // kh, w // kw)
        if cur[1] < 1 or cur[2] < 1:
            raise SpecError(f"layer {i}: output collapsed to {cur}")
        shapes.append(cur)
    return shapes


def output_width(spec: NetworkSpec) -> int:
    last = shape_chain(spec)[-1]
    return last[0] if len(last) == 1 else int(np.prod(last))


def validate_spec(spec: NetworkSpec) -> None:
    if spec.steps < 1:
        raise SpecError("steps must be >= 1")
    if spec.threshold <= 0:
        raise SpecError("threshold must be positive")
    if not 0.0 <= spec.decay < 1.0:
        raise SpecError("decay must lie in [0, 1)")
    if spec.reset not in (RESET_SUBTRACT, RESET_ZERO):
        raise SpecError(f"unknown reset {spec.reset!r}")
    if not spec.layers:
        raise SpecError("network needs at least one layer")
    shape_chain(spec)
    if spec.profile_name in PROFILES:
        if tuple(spec.input_shape) != (1, 64, 64):
            raise SpecError(f"{spec.profile_name} expects 1x64x64 input")
        if output_width(spec) != 128:
            raise SpecError(f"{spec.profile_name} must end in 128 output neurons")
    uses_q = any(l.activation == QUANTIZED_RELU for l in spec.layers)
    if uses_q and spec.act_bits is not None and spec.act_bits < 1:
        raise SpecError("act_bits must be >= 1 when set")


def fan_out(spec: NetworkSpec, index: int) -> int:
    """Outgoing weighted connections per unit of layer ``index``'s output:
    the per-unit weight count of the next weighted layer (pooling is
    transparent; the final layer fans out to nothing)."""
    for nxt in spec.layers[index + 1 :]:
        if nxt.kind == CONV2D:
            return nxt.out_channels * nxt.kernel[0] * nxt.kernel[1]
        if nxt.kind == LINEAR:
            return nxt.out_channels
    return 0


def build_profile(name: str) -> NetworkSpec:
    """The three fixed architecture stacks, one per deployment framework."""
    if name == "sinabs_like":
        spec = NetworkSpec(
            layers=(
                conv(4, (5, 5), stride=2, activation=IF_MULTISPIKE),
                avgpool(),
                conv(4, (3, 3), activation=IF_MULTISPIKE),
                avgpool(),
                linear(64, activation=IF_MULTISPIKE),
                linear(128, activation=IF_MULTISPIKE),
            ),
            steps=8,
            profile_name=name,
            threshold=1.0,
            decay=0.0,
        )
    elif name == "metatf_like":
        spec = NetworkSpec(
            layers=(
                conv(4, (5, 5), stride=2, bias=True, batchnorm=True, activation=QUANTIZED_RELU),
                maxpool(),
                conv(4, (3, 3), stride=2, bias=True, batchnorm=True, activation=QUANTIZED_RELU),
                linear(64, bias=True, batchnorm=True, activation=QUANTIZED_RELU),
                linear(128, bias=True),
            ),
            steps=1,
            profile_name=name,
            act_bits=4,
        )
    elif name == "lava_like":
        spec = NetworkSpec(
            layers=(
                conv(8, (5, 5), stride=2, activation=LIF_SINGLE),
                conv(16, (3, 3), activation=LIF_SINGLE),
                linear(64, activation=LIF_SINGLE),
                linear(128, activation=LIF_SINGLE),
            ),
            steps=20,
            profile_name=name,
            threshold=0.25,
            decay=0.05,
        )
    else:
        raise SpecError(f"unknown profile {name!r}; expected one of {PROFILES}")
    validate_spec(spec)
    return spec


# --------------------------------------------------------------------------
# weights
# --------------------------------------------------------------------------


@dataclass
class LayerWeights:
    weight: np.ndarray | None = None
    bias: np.ndarray | None = None
    bn_scale: np.ndarray | None = None
    bn_shift: np.ndarray | None = None
    bn_mean: np.ndarray | None = None
    bn_var: np.ndarray | None = None
    act_range: float | None = None

    def arrays(self):
        for name in ("weight", "bias", "bn_scale", "bn_shift", "bn_mean", "bn_var"):
            arr = getattr(self, name)
            if arr is not None:
                yield name, arr


@dataclass
class Weights:
    layers: list[LayerWeights]

    def validate_against(self, spec: NetworkSpec) -> None:
        if len(self.layers) != len(spec.layers):
            raise SpecError(
                f"weights carry {len(self.layers)} layers, spec has {len(spec.layers)}"
            )
        shapes = shape_chain(spec)
        for i, (lw, layer) in enumerate(zip(self.layers, spec.layers)):
            if layer.kind in POOLING_KINDS:
                if lw.weight is not None:
                    raise SpecError(f"layer {i}: pooling layer cannot carry weights")
                continue
            expected = _weight_shape(spec, shapes, i)
            if lw.weight is None or tuple(lw.weight.shape) != expected:
                got = None if lw.weight is None else tuple(lw.weight.shape)
                raise SpecError(f"layer {i}: weight shape {got} != expected {expected}")
            if layer.has_bias and (lw.bias is None or lw.bias.shape != (layer.out_channels,)):
                raise SpecError(f"layer {i}: bias missing or mis-shaped")
            if not layer.has_bias and lw.bias is not None:
                raise SpecError(f"layer {i}: unexpected bias")
            if not layer.batchnorm and lw.bn_scale is not None:
                raise SpecError(f"layer {i}: unexpected batchnorm arrays")
            for name, arr in lw.arrays():
                if not np.all(np.isfinite(arr)):
                    raise SpecError(f"layer {i}: non-finite values in {name}")


def _weight_shape(spec, shapes, i):
    layer = spec.layers[i]
    prev = shapes[i]
    if layer.kind == CONV2D:
        return (layer.out_channels, prev[0], layer.kernel[0], layer.kernel[1])
    feats = prev[0] if len(prev) == 1 else int(np.prod(prev))
    return (layer.out_channels, feats)


# --------------------------------------------------------------------------
# spike nonlinearities with surrogate backward passes
# --------------------------------------------------------------------------


def _surrogate(v, theta, gamma, periodic):
    # distance to the nearest threshold multiple (>= theta), exponential decay
    if periodic:
        k = torch.clamp(torch.round(v / theta), min=1.0)
    else:
        k = 1.0
    return torch.exp(-torch.abs(v - k * theta) / gamma) / gamma


class _MultiSpike(torch.autograd.Function):
    @staticmethod
    def forward(ctx, v, theta, gamma):
        ctx.save_for_backward(v)
        ctx.theta = theta
        ctx.gamma = gamma
        return torch.clamp(torch.floor(v / theta), min=0.0)

    @staticmethod
    def backward(ctx, grad_output):
        (v,) = ctx.saved_tensors
        return grad_output * _surrogate(v, ctx.theta, ctx.gamma, True), None, None


class _SingleSpike(torch.autograd.Function):
    @staticmethod
    def forward(ctx, v, theta, gamma):
        ctx.save_for_backward(v)
        ctx.theta = theta
        ctx.gamma = gamma
        return (v >= theta).to(v.dtype)

    @staticmethod
    def backward(ctx, grad_output):
        (v,) = ctx.saved_tensors
        return grad_output * _surrogate(v, ctx.theta, ctx.gamma, False), None, None


def _qrelu(x, bits, range_max):
    # straight-through estimator: clamp gradient, quantization step detached
    y = torch.clamp(x, min=0.0, max=float(range_max))
    if bits is None:
        return y
    step = float(range_max) / (2**bits - 1)
    q = torch.round(y / step) * step
    return y + (q - y).detach()


def _fake_quant_weight(w, bits):
    m = w.detach().abs().max()
    if m == 0:
        return w
    scale = m / (2 ** (bits - 1) - 1)
    q = torch.round(w / scale) * scale
    return w + (q - w).detach()


# --------------------------------------------------------------------------
# torch runtime
# --------------------------------------------------------------------------


@dataclass
class ForwardTrace:
    """Per-layer outputs over time plus the synaptic-operation total
    (spikes emitted x fan-out, summed over layers)."""

    layer_outputs: list[np.ndarray]
    synaptic_ops: int

    def spikes_emitted(self, index: int) -> float:
        return float(self.layer_outputs[index].sum())


@dataclass
class RunResult:
    rates: torch.Tensor
    synops: torch.Tensor
    spike_totals: list
    trace: ForwardTrace | None = None


class SpikingNet(torch.nn.Module):
    """Executable network for one NetworkSpec.

    ``run`` presents the binary frame as constant input at every time step,
    evolves per-layer neuron states from zero, and returns output rates.
    """

    def __init__(self, spec: NetworkSpec, dtype=torch.float64, seed: int | None = None):
        super().__init__()
        validate_spec(spec)
        self.spec = spec
        self._dtype = dtype
        self.qat_weight_bits: int | None = None
        if seed is not None:
            torch.manual_seed(seed)
        shapes = shape_chain(spec)
        mods = []
        for i, layer in enumerate(spec.layers):
            if layer.kind == CONV2D:
                m = torch.nn.Conv2d(
                    shapes[i][0],
                    layer.out_channels,
                    layer.kernel,
                    stride=layer.stride,
                    bias=layer.has_bias,
                    dtype=dtype,
                )
            elif layer.kind == LINEAR:
                feats = shapes[i][0] if len(shapes[i]) == 1 else int(np.prod(shapes[i]))
                m = torch.nn.Linear(feats, layer.out_channels, bias=layer.has_bias, dtype=dtype)
            elif layer.kind == AVGPOOL:
                m = torch.nn.AvgPool2d(layer.kernel)
            else:
                m = torch.nn.MaxPool2d(layer.kernel)
            mods.append(m)
        self.ops = torch.nn.ModuleList(mods)
        bns = []
        for i, layer in enumerate(spec.layers):
            if layer.batchnorm:
                if len(shapes[i + 1]) == 3:
                    bn = torch.nn.BatchNorm2d(layer.out_channels, dtype=dtype)
                else:
                    bn = torch.nn.BatchNorm1d(layer.out_channels, dtype=dtype)
            else:
                bn = torch.nn.Identity()
            bns.append(bn)
        self.bns = torch.nn.ModuleList(bns)
        # running activation ranges for quantized-relu layers (monotone max)
        init = torch.ones(len(spec.layers), dtype=dtype)
        self.register_buffer("act_ranges", init)
        self._track_ranges = False

    # -- weight interchange -------------------------------------------------

    def export_weights(self) -> Weights:
        out = []
        for i, layer in enumerate(self.spec.layers):
            lw = LayerWeights()
            if layer.kind in WEIGHTED_KINDS:
                m = self.ops[i]
                lw.weight = m.weight.detach().cpu().double().numpy().copy()
                if layer.has_bias:
                    lw.bias = m.bias.detach().cpu().double().numpy().copy()
                bn = self.bns[i]
                if layer.batchnorm and isinstance(bn, (torch.nn.BatchNorm1d, torch.nn.BatchNorm2d)):
                    lw.bn_scale = bn.weight.detach().cpu().double().numpy().copy()
                    lw.bn_shift = bn.bias.detach().cpu().double().numpy().copy()
                    lw.bn_mean = bn.running_mean.detach().cpu().double().numpy().copy()
                    lw.bn_var = bn.running_var.detach().cpu().double().numpy().copy()
                if layer.activation == QUANTIZED_RELU:
                    lw.act_range = float(self.act_ranges[i])
            out.append(lw)
        return Weights(layers=out)

    def export_folded_weights(self) -> Weights:
        """Export with batchnorm folded into the preceding weights/biases
        (the deployment form; biases are required where batchnorm was used)."""
        w = self.export_weights()
        for i, (layer, lw) in enumerate(zip(self.spec.layers, w.layers)):
            if lw.bn_scale is None:
                continue
            eps = self.bns[i].eps
            factor = lw.bn_scale / np.sqrt(lw.bn_var + eps)
            lw.weight = lw.weight * factor.reshape((-1,) + (1,) * (lw.weight.ndim - 1))
            base = lw.bias if lw.bias is not None else np.zeros_like(lw.bn_mean)
            lw.bias = lw.bn_shift + (base - lw.bn_mean) * factor
            lw.bn_scale = lw.bn_shift = lw.bn_mean = lw.bn_var = None
        return w

    def load_weights(self, weights: Weights) -> None:
        weights.validate_against(self.spec)
        with torch.no_grad():
            for i, (layer, lw) in enumerate(zip(self.spec.layers, weights.layers)):
                if layer.kind not in WEIGHTED_KINDS:
                    continue
                m = self.ops[i]
                m.weight.copy_(torch.as_tensor(lw.weight, dtype=self._dtype))
                if lw.bias is not None:
                    m.bias.copy_(torch.as_tensor(lw.bias, dtype=self._dtype))
                bn = self.bns[i]
                if lw.bn_scale is not None:
                    bn.weight.copy_(torch.as_tensor(lw.bn_scale, dtype=self._dtype))
                    bn.bias.copy_(torch.as_tensor(lw.bn_shift, dtype=self._dtype))
                    bn.running_mean.copy_(torch.as_tensor(lw.bn_mean, dtype=self._dtype))
                    bn.running_var.copy_(torch.as_tensor(lw.bn_var, dtype=self._dtype))
                elif layer.batchnorm:
                    # previously folded: make the module transparent
                    if isinstance(bn, (torch.nn.BatchNorm1d, torch.nn.BatchNorm2d)):
                        bn.weight.fill_(1.0)
                        bn.bias.fill_(0.0)
                        bn.running_mean.fill_(0.0)
                        bn.running_var.fill_(1.0 - bn.eps)
                if lw.act_range is not None:
                    self.act_ranges[i] = float(lw.act_range)

    # -- execution -----------------------------------------------------------

    def _as_input(self, frames) -> torch.Tensor:
        c, h, w = self.spec.input_shape
        arr = np.asarray(frames, dtype=np.float64)
        if not arr.flags.writeable:
            arr = arr.copy()
        x = torch.as_tensor(arr, dtype=self._dtype)
        if x.ndim == 2:
            x = x.reshape(1, c, h, w)
        elif x.ndim == 3:
            # (B, h, w) when single-channel, else one (c, h, w) sample
            if c == 1:
                x = x.reshape(x.shape[0], c, h, w)
            else:
                x = x.reshape(1, c, h, w)
        if x.shape[1:] != (c, h, w):
            raise SpecError(f"input shape {tuple(x.shape)} does not match {(c, h, w)}")
        if not torch.all(torch.isfinite(x)):
            raise ValueError("non-finite input frame")
        return x

    def _apply_weighted(self, i, layer, h):
        m = self.ops[i]
        if layer.kind == LINEAR and h.ndim > 2:
            h = h.flatten(1)
        if self.qat_weight_bits is not None:
            w = _fake_quant_weight(m.weight, self.qat_weight_bits)
            if layer.kind == CONV2D:
                h = torch.nn.functional.conv2d(h, w, m.bias, stride=layer.stride)
            else:
                h = torch.nn.functional.linear(h, w, m.bias)
        else:
            h = m(h)
        return self.bns[i](h)

    def run(self, frames, steps: int | None = None, record: bool = False, ann: bool = False) -> RunResult:
        spec = self.spec
        T = 1 if ann else int(steps or spec.steps)
        if T < 1:
            raise SpecError("steps must be >= 1")
        if ann and any(
            l.activation not in (None, IF_MULTISPIKE) for l in spec.layers
        ):
            raise SpecError("the single-step ReLU reference applies to multispike-IF stacks")
        x = self._as_input(frames)
        B = x.shape[0]
        if record and B != 1:
            raise SpecError("traces are recorded for single frames only")
        n_layers = len(spec.layers)
        states: list = [None] * n_layers
        spike_totals = [torch.zeros((), dtype=self._dtype) for _ in range(n_layers)]
        recorded: list[list] = [[] for _ in range(n_layers)] if record else None
        out_sum = None
        for _ in range(T):
            h = x
            for i, layer in enumerate(spec.layers):
                if layer.kind in WEIGHTED_KINDS:
                    h = self._apply_weighted(i, layer, h)
                elif layer.kind == AVGPOOL:
                    h = self.ops[i](h)
                else:
                    h = self.ops[i](h)
                act = layer.activation
                if ann:
                    if act == IF_MULTISPIKE:
                        h = torch.clamp(h, min=0.0)
                elif act == IF_MULTISPIKE:
                    v = (h if states[i] is None else states[i] + h)
                    s = _MultiSpike.apply(v, spec.threshold, spec.gamma)
                    states[i] = self._reset(v, s)
                    spike_totals[i] = spike_totals[i] + s.sum()
                    h = s
                elif act == LIF_SINGLE:
                    prev = 0.0 if states[i] is None else (1.0 - spec.decay) * states[i]
                    v = prev + h
                    s = _SingleSpike.apply(v, spec.threshold, spec.gamma)
                    states[i] = self._reset(v, s)
                    spike_totals[i] = spike_totals[i] + s.sum()
                    h = s
                elif act == QUANTIZED_RELU:
                    if self._track_ranges:
                        peak = h.detach().max()
                        if peak > self.act_ranges[i]:
                            self.act_ranges[i] = peak
                    rng = float(self.act_ranges[i])
                    h = _qrelu(h, spec.act_bits, rng)
                    if spec.act_bits is not None:
                        step = rng / (2**spec.act_bits - 1)
                        spike_totals[i] = spike_totals[i] + (h / step).sum()
                if record:
                    recorded[i].append(h.detach().cpu().double().numpy().copy())
            out_sum = h if out_sum is None else out_sum + h
        rates = out_sum / T
        synops = torch.zeros((), dtype=self._dtype)
        for i in range(n_layers):
            fo = fan_out(spec, i)
            if fo:
                synops = synops + spike_totals[i] * fo
        trace = None
        if record:
            outs = [np.stack([step[0] for step in recorded[i]]) for i in range(n_layers)]
            trace = ForwardTrace(layer_outputs=outs, synaptic_ops=int(round(float(synops))))
        return RunResult(rates=rates, synops=synops, spike_totals=spike_totals, trace=trace)

    def _reset(self, v, s):
        if self.spec.reset == RESET_SUBTRACT:
            return v - self.spec.threshold * s
        return torch.where(s.detach() > 0, torch.zeros((), dtype=v.dtype), v)


def init_weights(spec: NetworkSpec, seed: int = 0) -> Weights:
    """Fresh weights, uniform in +-1/sqrt(fan_in) per layer."""
    return SpikingNet(spec, seed=seed).export_weights()


def forward(spec: NetworkSpec, weights: Weights, frame, steps: int | None = None):
    """Single-frame inference: returns (output rates, ForwardTrace)."""
    net = SpikingNet(spec)
    net.load_weights(weights)
    net.eval()
    with torch.no_grad():
        res = net.run(frame, steps=steps, record=True)
    return res.rates[0].cpu().double().numpy().copy(), res.trace


def forward_ann(spec: NetworkSpec, weights: Weights, frame) -> np.ndarray:
    """The rate-code conversion reference: same stack, exact ReLU, one step."""
    net = SpikingNet(spec)
    net.load_weights(weights)
    net.eval()
    with torch.no_grad():
        res = net.run(frame, ann=True)
    return res.rates[0].cpu().double().numpy().copy()


def batch_rates(spec: NetworkSpec, weights: Weights, frames, steps: int | None = None) -> np.ndarray:
    """Output rates for a batch of frames, (B, out_width)."""
    net = SpikingNet(spec)
    net.load_weights(weights)
    net.eval()
    with torch.no_grad():
        res = net.run(frames, steps=steps)
    return res.rates.cpu().double().numpy().copy()


# --------------------------------------------------------------------------
# model file format (versioned, self-describing text)
# --------------------------------------------------------------------------

_ACT_NAMES = {None: "none", IF_MULTISPIKE: IF_MULTISPIKE, LIF_SINGLE: LIF_SINGLE, QUANTIZED_RELU: QUANTIZED_RELU}


def save_model(path, spec: NetworkSpec, weights: Weights) -> None:
    weights.validate_against(spec)
    with open(path, "w") as fh:
        fh.write(f"snnball-model {MODEL_FORMAT}\n")
        fh.write(f"profile {spec.profile_name}\n")
        fh.write(f"steps {spec.steps}\n")
        fh.write(f"input {spec.input_shape[0]} {spec.input_shape[1]} {spec.input_shape[2]}\n")
        fh.write(f"threshold {spec.threshold!r}\n")
        fh.write(f"decay {spec.decay!r}\n")
        fh.write(f"gamma {spec.gamma!r}\n")
        fh.write(f"act_bits {'none' if spec.act_bits is None else spec.act_bits}\n")
        fh.write(f"reset {spec.reset}\n")
        fh.write(f"layers {len(spec.layers)}\n")
        for i, l in enumerate(spec.layers):
            fh.write(
                f"layer {i} {l.kind} out_channels={l.out_channels} "
                f"kernel={l.kernel[0]}x{l.kernel[1]} stride={l.stride} "
                f"bias={int(l.has_bias)} batchnorm={int(l.batchnorm)} "
                f"activation={_ACT_NAMES[l.activation]}\n"
            )
        for i, lw in enumerate(weights.layers):
            for name, arr in lw.arrays():
                dims = " ".join(str(d) for d in arr.shape)
                fh.write(f"tensor {i} {name} {dims}\n")
                flat = arr.reshape(-1)
                for k in range(0, flat.size, 8):
                    fh.write(" ".join(repr(float(v)) for v in flat[k : k + 8]) + "\n")
            if lw.act_range is not None:
                fh.write(f"tensor {i} act_range 1\n{lw.act_range!r}\n")
        fh.write("end\n")


def load_model(path):
    with open(path) as fh:
        lines = fh.read().splitlines()
    pos = 0

    def take():
        nonlocal pos
        if pos >= len(lines):
            raise SpecError(f"{path}: truncated model file")
        line = lines[pos]
        pos += 1
        return line

    magic = take().split()
    if len(magic) != 2 or magic[0] != "snnball-model":
        raise SpecError(f"{path}: not a model file")
    if int(magic[1]) != MODEL_FORMAT:
        raise SpecError(f"{path}: unsupported format {magic[1]}")
    header = {}
    while True:
        key, _, value = take().partition(" ")
        if key == "layers":
            n_layers = int(value)
            break
        header[key] = value
    layers = []
    for _ in range(n_layers):
        parts = take().split()
        if parts[0] != "layer":
            raise SpecError(f"{path}: expected layer line, got {parts[0]!r}")
        kv = dict(p.split("=", 1) for p in parts[3:])
        kh, kw = kv["kernel"].split("x")
        act = kv["activation"]
        layers.append(
            LayerSpec(
                kind=parts[2],
                out_channels=int(kv["out_channels"]),
                kernel=(int(kh), int(kw)),
                stride=int(kv["stride"]),
                has_bias=bool(int(kv["bias"])),
                batchnorm=bool(int(kv["batchnorm"])),
                activation=None if act == "none" else act,
            )
        )
    ci, hi, wi = header["input"].split()
    spec = NetworkSpec(
        layers=tuple(layers),
        steps=int(header["steps"]),
        profile_name=header["profile"],
        input_shape=(int(ci), int(hi), int(wi)),
        threshold=float(header["threshold"]),
        decay=float(header["decay"]),
        gamma=float(header["gamma"]),
        act_bits=None if header["act_bits"] == "none" else int(header["act_bits"]),
        reset=header.get("reset", RESET_SUBTRACT),
    )
    validate_spec(spec)
    weights = Weights(layers=[LayerWeights() for _ in range(n_layers)])
    while True:
        line = take()
        if line == "end":
            break
        parts = line.split()
        if parts[0] != "tensor":
            raise SpecError(f"{path}: expected tensor line, got {line!r}")
        idx, name = int(parts[1]), parts[2]
        dims = tuple(int(d) for d in parts[3:])
        count = int(np.prod(dims))
        values: list[float] = []
        while len(values) < count:
            values.extend(float(v) for v in take().split())
        if len(values) != count:
            raise SpecError(f"{path}: tensor {idx} {name} has {len(values)} values, wants {count}")
        if name == "act_range":
            weights.layers[idx].act_range = values[0]
        else:
            setattr(weights.layers[idx], name, np.asarray(values, dtype=np.float64).reshape(dims))
    weights.validate_against(spec)
    return spec, weights

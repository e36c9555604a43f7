"""Device-constraint validation and weight quantization.

Profiles model the per-device restrictions qualitatively reported for the
three edge-device classes: layer kinds, pooling placement, bias support,
neuron models, per-layer neuron budgets, and weight precision. Numeric limits
are desk-scale fixtures, not vendor figures (see the shipped profile files).
"""

from __future__ import annotations

from dataclasses import dataclass
from importlib import resources

import numpy as np

from .decode import decode, score
from .events import Roi
from .network import (
    POOLING_KINDS,
    NetworkSpec,
    Weights,
    batch_rates,
    shape_chain,
)

POOLING_NONE = "none"
POOLING_FIRST = "first_layer_only"
POOLING_ALL = "all"
POOLING_POLICIES = (POOLING_NONE, POOLING_FIRST, POOLING_ALL)

BUILTIN_PROFILES = ("dynapcnn_like", "akida_like", "loihi2_like")


@dataclass(frozen=True)
class DeviceProfile:
    name: str
    max_neurons_per_layer: int
    allowed_layer_kinds: frozenset
    pooling_allowed: str
    bias_supported: bool
    weight_bits: int
    neuron_modes_supported: frozenset

    def __post_init__(self):
        if self.weight_bits < 1:
            raise ValueError("weight_bits must be >= 1")
        if not self.allowed_layer_kinds or not self.neuron_modes_supported:
            raise ValueError("allowed kinds / neuron modes must be non-empty")
        if self.pooling_allowed not in POOLING_POLICIES:
            raise ValueError(f"unknown pooling policy {self.pooling_allowed!r}")


@dataclass(frozen=True)
class Violation:
    layer: int
    constraint: str
    detail: str


@dataclass(frozen=True)
class ValidationReport:
    violations: tuple[Violation, ...]

    @property
    def passed(self) -> bool:
        return not self.violations


def load_profile(path_or_name) -> DeviceProfile:
    """Read a flat key-value profile file; bare built-in names resolve to the
    three shipped profiles."""
    name = str(path_or_name)
    if name in BUILTIN_PROFILES:
        ref = resources.files("snnball").joinpath(f"profiles/{name}.profile")
        text = ref.read_text()
    else:
        with open(name) as fh:
            text = fh.read()
    values = {}
    for line in text.splitlines():
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        key, _, val = line.partition(" ")
        values[key] = val.strip()
    try:
        return DeviceProfile(
            name=values["name"],
            max_neurons_per_layer=int(values["max_neurons_per_layer"]),
            allowed_layer_kinds=frozenset(values["allowed_layer_kinds"].split(",")),
            pooling_allowed=values["pooling_allowed"],
            bias_supported=bool(int(values["bias_supported"])),
            weight_bits=int(values["weight_bits"]),
            neuron_modes_supported=frozenset(values["neuron_modes_supported"].split(",")),
        )
    except KeyError as exc:
        raise ValueError(f"{path_or_name}: missing profile key {exc}") from None


def builtin_profile(name: str) -> DeviceProfile:
    if name not in BUILTIN_PROFILES:
        raise ValueError(f"unknown device profile {name!r}; built-ins: {BUILTIN_PROFILES}")
    return load_profile(name)


def validate(spec: NetworkSpec, profile: DeviceProfile, weights: Weights | None = None) -> ValidationReport:
    """Check every layer against the device profile, reporting all violations.

    A pooling layer yields at most one violation (placement, kind and support
    are the same physical constraint). When ``weights`` are supplied, each
    layer must already lie on the profile's symmetric quantization grid.
    """
    shapes = shape_chain(spec)
    violations: list[Violation] = []
    weighted_seen = 0
    for i, layer in enumerate(spec.layers):
        if layer.kind in POOLING_KINDS:
            if profile.pooling_allowed == POOLING_NONE:
                violations.append(Violation(i, "pooling", "pooling cannot be mapped onto this device"))
            elif layer.kind not in profile.allowed_layer_kinds:
                violations.append(Violation(i, "pooling", f"{layer.kind} is not the supported pooling type"))
            elif profile.pooling_allowed == POOLING_FIRST and weighted_seen != 1:
                violations.append(Violation(i, "pooling", "pooling is only supported after the first layer"))
            continue
        weighted_seen += 1
        if layer.kind not in profile.allowed_layer_kinds:
            violations.append(Violation(i, "layer-kind", f"{layer.kind} not supported"))
        neurons = int(np.prod(shapes[i + 1]))
        if neurons > profile.max_neurons_per_layer:
            violations.append(
                Violation(i, "neurons", f"{neurons} neurons exceed the per-layer limit {profile.max_neurons_per_layer}")
            )
        if layer.has_bias and not profile.bias_supported:
            violations.append(Violation(i, "bias", "biases are not supported"))
        if layer.batchnorm and not profile.bias_supported:
            violations.append(Violation(i, "bias", "batchnorm folding needs bias support"))
        if layer.activation and layer.activation not in profile.neuron_modes_supported:
            violations.append(Violation(i, "neuron-mode", f"{layer.activation} not supported"))
        if weights is not None:
            lw = weights.layers[i]
            if lw.weight is not None and not _on_grid(lw.weight, profile.weight_bits):
                violations.append(
                    Violation(i, "weight-bits", f"weights are not {profile.weight_bits}-bit quantized")
                )
    return ValidationReport(violations=tuple(violations))


def _quantize_array(arr: np.ndarray, bits: int):
    m = float(np.abs(arr).max()) if arr.size else 0.0
    scale = 1.0 if m == 0.0 else m / (2 ** (bits - 1) - 1)
    q = np.round(arr / scale) * scale
    return q, scale


def _on_grid(arr: np.ndarray, bits: int) -> bool:
    q, _ = _quantize_array(arr, bits)
    return bool(np.array_equal(q, arr))


def quantize_weights(weights: Weights, bits: int):
    """Symmetric uniform per-layer quantization of the weight tensors with
    scale max|w| / (2^(bits-1) - 1); biases pass through.

    Returns (quantized Weights, per-layer max absolute rounding error — None
    for weightless layers).
    """
    if bits < 2:
        raise ValueError("bits must be >= 2")
    out_layers = []
    errors: list[float | None] = []
    for lw in weights.layers:
        if lw.weight is None:
            out_layers.append(lw)
            errors.append(None)
            continue
        q, _scale = _quantize_array(lw.weight, bits)
        new = type(lw)(
            weight=q,
            bias=None if lw.bias is None else lw.bias.copy(),
            bn_scale=None if lw.bn_scale is None else lw.bn_scale.copy(),
            bn_shift=None if lw.bn_shift is None else lw.bn_shift.copy(),
            bn_mean=None if lw.bn_mean is None else lw.bn_mean.copy(),
            bn_var=None if lw.bn_var is None else lw.bn_var.copy(),
            act_range=lw.act_range,
        )
        out_layers.append(new)
        errors.append(float(np.abs(lw.weight - q).max()) if lw.weight.size else 0.0)
    return Weights(layers=out_layers), errors


def _predict(spec, weights, samples):
    frames = np.stack([s.frame.bits for s in samples]).astype(np.float64)
    rates = batch_rates(spec, weights, frames)
    dets = []
    for s, row in zip(samples, rates):
        x0, y0 = s.frame.origin
        roi = Roi(center=(x0 + 32, y0 + 32), origin=(x0, y0))
        dets.append(decode(row, roi))
    return dets


def report_gap(spec: NetworkSpec, weights: Weights, samples, bits: int = 8):
    """Detection accuracy before/after weight quantization on the same data.

    Returns (float ErrorStats, quantized ErrorStats).
    """
    samples = list(samples)
    truths = [s.truth for s in samples]
    base = score(_predict(spec, weights, samples), truths)
    qw, _ = quantize_weights(weights, bits)
    quant = score(_predict(spec, qw, samples), truths)
    return base, quant

"""Independent step-by-step network simulator used as an oracle.

Deliberately naive: explicit python loops over output positions, no torch, no
code shared with the package runtime. Supports the custom IF/LIF stacks the
tests build (no batchnorm)."""

import numpy as np


def conv2d_valid(x, w, b, stride):
    cin, h, wdt = x.shape
    out_ch, _, kh, kw = w.shape
    ho = (h - kh) // stride + 1
    wo = (wdt - kw) // stride + 1
    out = np.zeros((out_ch, ho, wo))
    for o in range(out_ch):
        for i in range(ho):
            for j in range(wo):
                patch = x[:, i * stride : i * stride + kh, j * stride : j * stride + kw]
                out[o, i, j] = float(np.sum(patch * w[o]))
        if b is not None:
            out[o] += b[o]
    return out


def pool2(x, kind, size=2):
    c, h, w = x.shape
    ho, wo = h // size, w // size
    out = np.zeros((c, ho, wo))
    for ch in range(c):
        for i in range(ho):
            for j in range(wo):
                blk = x[ch, size * i : size * i + size, size * j : size * j + size]
                out[ch, i, j] = blk.mean() if kind == "avg" else blk.max()
    return out


def _apply_layer(layer, lw, h):
    if layer.kind == "conv2d":
        return conv2d_valid(h, lw.weight, lw.bias, layer.stride)
    if layer.kind == "linear":
        flat = h.reshape(-1)
        out = lw.weight @ flat
        if lw.bias is not None:
            out = out + lw.bias
        return out
    if layer.kind == "avgpool":
        return pool2(h, "avg", layer.kernel[0])
    return pool2(h, "max", layer.kernel[0])


def simulate(spec, weights, frame, steps=None):
    """Spiking run; returns (rates, per-layer spike totals)."""
    T = steps or spec.steps
    x = np.asarray(frame, dtype=np.float64).reshape(spec.input_shape)
    states = {}
    totals = [0.0] * len(spec.layers)
    out_sum = None
    for _ in range(T):
        h = x
        for i, layer in enumerate(spec.layers):
            h = _apply_layer(layer, weights.layers[i], h)
            if layer.activation == "if_multispike":
                v = states.get(i, 0.0) + h
                s = np.maximum(np.floor(v / spec.threshold), 0.0)
                states[i] = v - s * spec.threshold
                totals[i] += float(s.sum())
                h = s
            elif layer.activation == "lif_single":
                v = (1.0 - spec.decay) * states.get(i, 0.0) + h
                s = (v >= spec.threshold).astype(np.float64)
                states[i] = v - s * spec.threshold
                totals[i] += float(s.sum())
                h = s
        out_sum = h if out_sum is None else out_sum + h
    return out_sum / T, totals


def simulate_ann(spec, weights, frame):
    """Single-step exact-ReLU reference for multispike stacks."""
    h = np.asarray(frame, dtype=np.float64).reshape(spec.input_shape)
    for i, layer in enumerate(spec.layers):
        h = _apply_layer(layer, weights.layers[i], h)
        if layer.activation == "if_multispike":
            h = np.maximum(h, 0.0)
    return h

"""Declarative layer specs: forward execution, parameter counts,
receptive-field arithmetic, He initialization, and text serialization."""

from dataclasses import dataclass, field

import numpy as np

from . import tensor as T
from .errors import ShapeError

KINDS = ("conv", "maxpool", "upsample", "relu", "sigmoid")


@dataclass(frozen=True)
class LayerSpec:
    kind: str
    kernel: tuple = (1, 1)
    stride: tuple = (1, 1)
    padding: tuple = (0, 0)
    in_channels: int = 0
    out_channels: int = 0
    upsample_factor: int = 1

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown layer kind {self.kind!r}")
        if min(self.kernel) < 1 or min(self.stride) < 1:
            raise ValueError("kernel/stride extents must be >= 1")
        if self.kind == "conv" and (self.in_channels < 1 or self.out_channels < 1):
            raise ValueError("conv layers need in/out channel counts >= 1")
        if self.kind == "upsample" and self.upsample_factor < 1:
            raise ValueError("upsample factor must be >= 1")


def conv(cin, cout, k=3, s=1, p=1):
    return LayerSpec("conv", (k, k), (s, s), (p, p), cin, cout)


def maxpool(k, s=None):
    s = k if s is None else s
    return LayerSpec("maxpool", (k, k), (s, s))


def up(factor):
    return LayerSpec("upsample", upsample_factor=factor)


RELU = LayerSpec("relu")
SIGMOID = LayerSpec("sigmoid")


@dataclass
class NetworkSpec:
    name: str
    layers: list = field(default_factory=list)

    def validate(self, in_channels):
        c = in_channels
        for i, layer in enumerate(self.layers):
            if layer.kind == "conv":
                if layer.in_channels != c:
                    raise ShapeError(
                        f"{self.name} layer {i}: expects {layer.in_channels} "
                        f"channels, chain carries {c}"
                    )
                c = layer.out_channels
        return c


def output_shape(spec, shape):
    """Chain (channels, rows, cols) through the spec's layers."""
    c, h, w = shape
    for layer in spec.layers:
        if layer.kind == "conv":
            c = layer.out_channels
        if layer.kind in ("conv", "maxpool"):
            (kh, kw), (sh, sw), (ph, pw) = layer.kernel, layer.stride, layer.padding
            h = (h + 2 * ph - kh) // sh + 1
            w = (w + 2 * pw - kw) // sw + 1
        elif layer.kind == "upsample":
            h *= layer.upsample_factor
            w *= layer.upsample_factor
    return (c, h, w)


def per_layer_parameters(spec):
    counts = []
    for layer in spec.layers:
        if layer.kind == "conv":
            kh, kw = layer.kernel
            counts.append(layer.out_channels * layer.in_channels * kh * kw
                          + layer.out_channels)
        else:
            counts.append(0)
    return counts


def count_parameters(spec):
    return sum(per_layer_parameters(spec))


def receptive_field(spec, rf=1, jump=1.0):
    """Per-layer (description, rf, jump) via kernel/stride composition.

    Pass the (rf, jump) of an upstream network to chain specs. Upsampling
    divides the jump and leaves the receptive field unchanged.
    """
    rows = []
    for layer in spec.layers:
        if layer.kind in ("conv", "maxpool"):
            rf = rf + (layer.kernel[0] - 1) * jump
            jump = jump * layer.stride[0]
        elif layer.kind == "upsample":
            jump = jump / layer.upsample_factor
        rows.append((describe(layer), int(rf), jump))
    return rows


def describe(layer):
    if layer.kind == "conv":
        return (f"conv {layer.kernel[0]}x{layer.kernel[1]} "
                f"{layer.in_channels}->{layer.out_channels}")
    if layer.kind == "maxpool":
        return f"maxpool k{layer.kernel[0]} s{layer.stride[0]}"
    if layer.kind == "upsample":
        return f"upsample x{layer.upsample_factor}"
    return layer.kind


def init_weights(spec, prefix, rng):
    """He-uniform conv weights, zero biases; returns name -> Tensor."""
    store = {}
    idx = 0
    for layer in spec.layers:
        if layer.kind != "conv":
            continue
        idx += 1
        kh, kw = layer.kernel
        fan_in = layer.in_channels * kh * kw
        bound = np.sqrt(6.0 / fan_in)
        w = rng.uniform(-bound, bound,
                        size=(layer.out_channels, layer.in_channels, kh, kw))
        store[f"{prefix}conv{idx:02d}/weight"] = T.Tensor(w, requires_grad=True)
        store[f"{prefix}conv{idx:02d}/bias"] = T.Tensor(
            np.zeros((1, layer.out_channels, 1, 1)), requires_grad=True)
    return store


def forward(spec, x, weights, prefix="", upsample_to=None):
    """Run the spec's layers on tensor x using weights under `prefix`.

    upsample_to, when given, makes upsample layers resize straight to that
    (rows, cols) target instead of applying their integer factor; the
    full-scale networks make the two paths identical.
    """
    idx = 0
    for layer in spec.layers:
        if layer.kind == "conv":
            idx += 1
            wkey = f"{prefix}conv{idx:02d}/weight"
            bkey = f"{prefix}conv{idx:02d}/bias"
            if wkey not in weights:
                raise KeyError(f"missing weight entry {wkey!r}")
            x = T.conv2d(x, weights[wkey], weights.get(bkey),
                         stride=layer.stride, padding=layer.padding)
        elif layer.kind == "maxpool":
            x = T.maxpool2d(x, layer.kernel, layer.stride)
        elif layer.kind == "upsample":
            if upsample_to is not None:
                x = T.resize_bilinear(x, *upsample_to)
            else:
                x = T.upsample(x, layer.upsample_factor)
        elif layer.kind == "relu":
            x = T.relu(x)
        elif layer.kind == "sigmoid":
            x = T.sigmoid(x)
    return x


def serialize(spec):
    """Line-oriented text form: 'kind k s p in out factor' per layer."""
    lines = [f"# {spec.name}"]
    for l in spec.layers:
        lines.append(f"{l.kind} {l.kernel[0]} {l.stride[0]} {l.padding[0]} "
                     f"{l.in_channels} {l.out_channels} {l.upsample_factor}")
    return "\n".join(lines) + "\n"


def deserialize(text):
    name = "network"
    layers = []
    for line in text.splitlines():
        line = line.strip()
        if not line:
            continue
        if line.startswith("#"):
            name = line[1:].strip()
            continue
        kind, k, s, p, cin, cout, factor = line.split()
        layers.append(LayerSpec(kind, (int(k), int(k)), (int(s), int(s)),
                                (int(p), int(p)), int(cin), int(cout),
                                int(factor)))
    return NetworkSpec(name, layers)

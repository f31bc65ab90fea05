"""Dual-expert local stream: cube-face routing, per-face encoder-decoder
with an exponential-moving-average recurrence at the bottleneck, and fusion
with the attention stream by pixelwise multiplication."""

from dataclasses import dataclass, field

import numpy as np

from . import network as N
from . import tensor as T
from .errors import ShapeError
from .geometry import CubeFaces

POLE_FACES = (4, 5)
EQUATOR_FACES = (0, 1, 2, 3)

FACE_SIZE = 160


@dataclass
class EmaState:
    """Running EMA buffer: E_t = alpha * S_t + (1 - alpha) * E_{t-1}."""

    alpha: float = 0.1
    E: np.ndarray = None
    initialized: bool = False

    def __post_init__(self):
        if not 0.0 < self.alpha <= 1.0:
            raise ValueError(f"alpha must be in (0, 1], got {self.alpha}")

    def reset(self):
        self.E = None
        self.initialized = False


def ema_step(s_t, state):
    """Advance the EMA state with tensor s_t; first frame passes through."""
    s = s_t.data if isinstance(s_t, T.Tensor) else np.asarray(s_t, dtype=np.float64)
    if not state.initialized:
        state.E = s.copy()
        state.initialized = True
    else:
        if s.shape != state.E.shape:
            raise ShapeError(
                f"EMA state shape drift: {state.E.shape} -> {s.shape}")
        state.E = state.alpha * s + (1.0 - state.alpha) * state.E
    return T.Tensor(state.E.copy())


def build_expert_spec():
    """Compact 160x160 encoder-decoder; the conv right after the third pool
    is the EMA-wrapped bottleneck layer (see ExpertModel.ema_after)."""
    layers = [
        N.conv(3, 16), N.RELU, N.maxpool(2),
        N.conv(16, 32), N.RELU, N.maxpool(2),
        N.conv(32, 64), N.RELU, N.maxpool(2),
        N.conv(64, 64), N.RELU,           # bottleneck, EMA after this relu
        N.conv(64, 32), N.RELU, N.up(2),
        N.conv(32, 16), N.RELU, N.up(2),
        N.conv(16, 8), N.RELU, N.up(2),
        N.conv(8, 1, k=1, p=0), N.SIGMOID,
    ]
    return N.NetworkSpec("expert", layers)


# index of the last bottleneck layer (the relu after conv 64->64)
_EMA_AFTER = 10


@dataclass
class ExpertModel:
    spec: N.NetworkSpec = field(default_factory=build_expert_spec)
    ema_after: int = _EMA_AFTER

    def init_weights(self, prefix, rng):
        return N.init_weights(self.spec, prefix, rng)

    def forward(self, x, weights, prefix, state=None):
        """Feedforward pass; when `state` is given the bottleneck output is
        replaced by its EMA before the decoder half runs."""
        head = N.NetworkSpec(self.spec.name, self.spec.layers[: self.ema_after + 1])
        tail_layers = self.spec.layers[self.ema_after + 1 :]
        n_head_convs = sum(1 for l in head.layers if l.kind == "conv")
        s = N.forward(head, x, weights, prefix)
        if state is not None:
            s = ema_step(s, state)
        idx = n_head_convs
        for layer in tail_layers:
            if layer.kind == "conv":
                idx += 1
                wkey = f"{prefix}conv{idx:02d}/weight"
                if wkey not in weights:
                    raise KeyError(f"missing weight entry {wkey!r}")
                s = T.conv2d(s, weights[wkey], weights.get(f"{prefix}conv{idx:02d}/bias"),
                             stride=layer.stride, padding=layer.padding)
            elif layer.kind == "maxpool":
                s = T.maxpool2d(s, layer.kernel, layer.stride)
            elif layer.kind == "upsample":
                s = T.upsample(s, layer.upsample_factor)
            elif layer.kind == "relu":
                s = T.relu(s)
            elif layer.kind == "sigmoid":
                s = T.sigmoid(s)
        return s


def route_faces(faces):
    """Split a CubeFaces into (pole faces 4-5, equator faces 0-3)."""
    f = faces.faces
    if f.shape[0] != 6:
        raise ValueError(f"expected 6 faces, got {f.shape[0]}")
    return f[list(POLE_FACES)], f[list(EQUATOR_FACES)]


def merge_faces(pole_batch, equator_batch):
    """Inverse of route_faces: restore the canonical face order."""
    n = equator_batch.shape[1]
    shape = (6,) + equator_batch.shape[1:]
    out = np.empty(shape)
    out[list(EQUATOR_FACES)] = equator_batch
    out[list(POLE_FACES)] = pole_batch
    return CubeFaces(out)


def _face_to_input(face):
    """(N, N) or (N, N, 3) face -> 1x3xNxN tensor."""
    if face.ndim == 2:
        chw = np.repeat(face[None], 3, axis=0)
    else:
        chw = face.transpose(2, 0, 1)
        if chw.shape[0] == 1:
            chw = np.repeat(chw, 3, axis=0)
    return T.Tensor(chw[None])


def forward_experts(video_faces, weights, model=None, alpha=0.1):
    """Run both experts over a sequence of CubeFaces.

    EMA state is kept per face index and reset at the start of the sequence;
    returns one single-channel CubeFaces of per-face saliency per frame.
    """
    if model is None:
        model = ExpertModel()
    states = [EmaState(alpha=alpha) for _ in range(6)]
    outputs = []
    with T.no_grad():
        for faces in video_faces:
            n = faces.face_size
            sal = np.empty((6, n, n))
            for idx in range(6):
                prefix = "poles/" if idx in POLE_FACES else "equator/"
                x = _face_to_input(faces.faces[idx])
                y = model.forward(x, weights, prefix, state=states[idx])
                sal[idx] = y.data[0, 0]
            outputs.append(CubeFaces(sal))
    return outputs


def fuse(y1, y2):
    """Final map: elementwise product of the two streams (no renormalization)."""
    a = np.asarray(y1, dtype=np.float64)
    b = np.asarray(y2, dtype=np.float64)
    if a.shape != b.shape:
        raise ShapeError(f"fuse: shape mismatch {a.shape} vs {b.shape}")
    return a * b

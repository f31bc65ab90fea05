"""Named weight stores, the ATSW binary file format, and the Adam optimizer.

ATSW layout (little-endian): magic b"ATSW", u32 version=1, u32 entry count;
per entry: u16 name length, UTF-8 name, four u32 extents, then
extent-product float32 values.
"""

import struct

import numpy as np

from .errors import FormatError
from .tensor import Tensor

MAGIC = b"ATSW"
VERSION = 1


def save_weights(store, path):
    """Write a dict of name -> Tensor to an ATSW file."""
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<II", VERSION, len(store)))
        for name in sorted(store):
            t = store[name]
            enc = name.encode("utf-8")
            fh.write(struct.pack("<H", len(enc)))
            fh.write(enc)
            fh.write(struct.pack("<4I", *t.shape))
            fh.write(t.data.astype("<f4").tobytes())


def load_weights(path, requires_grad=False):
    """Read an ATSW file into a dict of name -> Tensor."""
    with open(path, "rb") as fh:
        magic = fh.read(4)
        if magic != MAGIC:
            raise FormatError(f"{path}: bad magic {magic!r}, expected {MAGIC!r}")
        version, count = struct.unpack("<II", fh.read(8))
        if version != VERSION:
            raise FormatError(f"{path}: unsupported ATSW version {version}")
        store = {}
        for _ in range(count):
            (nlen,) = struct.unpack("<H", fh.read(2))
            name = fh.read(nlen).decode("utf-8")
            shape = struct.unpack("<4I", fh.read(16))
            n = int(np.prod(shape))
            buf = fh.read(4 * n)
            if len(buf) != 4 * n:
                raise FormatError(f"{path}: truncated payload for {name!r}")
            data = np.frombuffer(buf, dtype="<f4").astype(np.float64).reshape(shape)
            store[name] = Tensor(data, requires_grad=requires_grad)
        return store


class Adam:
    """Adam with bias correction; moments persist across step() calls."""

    def __init__(self, lr=1e-5, beta1=0.9, beta2=0.999, eps=1e-8):
        self.lr = lr
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.t = 0
        self._m = {}
        self._v = {}

    def step(self, params, grads):
        """One update over a dict of name -> Tensor given name -> grad arrays."""
        missing = [k for k in params if k not in grads]
        if missing:
            raise ValueError(f"adam step: missing gradients for {sorted(missing)}")
        self.t += 1
        bc1 = 1.0 - self.beta1**self.t
        bc2 = 1.0 - self.beta2**self.t
        for name, p in params.items():
            g = grads[name]
            m = self._m.get(name)
            if m is None:
                m = np.zeros_like(p.data)
                v = np.zeros_like(p.data)
            else:
                v = self._v[name]
            m = self.beta1 * m + (1.0 - self.beta1) * g
            v = self.beta2 * v + (1.0 - self.beta2) * g * g
            self._m[name] = m
            self._v[name] = v
            p.data -= self.lr * (m / bc1) / (np.sqrt(v / bc2) + self.eps)


def adam_step(params, grads, optimizer):
    """Functional wrapper: apply one Adam update in place and return params."""
    optimizer.step(params, grads)
    return params

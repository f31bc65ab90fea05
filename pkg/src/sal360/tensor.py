"""Dense rank-4 tensors with reverse-mode automatic differentiation.

A Tensor wraps a float64 numpy array of shape (batch, channels, rows, cols).
Ops build a graph of backward closures; calling `backward()` on a scalar
result fills `.grad` on every reachable tensor that requires gradients.
Weight files store float32; all arithmetic here is float64 so that
finite-difference gradient checks hold to tight tolerances.
"""

from contextlib import contextmanager

import numpy as np

from . import kernels as K
from .errors import ShapeError, TapeError

# cap on the im2col buffer, in float64 elements (~32 MB)
_CHUNK_ELEMS = 1 << 22

_grad_enabled = True


@contextmanager
def no_grad():
    global _grad_enabled
    prev = _grad_enabled
    _grad_enabled = False
    try:
        yield
    finally:
        _grad_enabled = prev


class Tensor:
    """Rank-4 float tensor, optionally tracked by the autodiff tape."""

    __slots__ = ("data", "grad", "requires_grad", "_parents", "_backward")

    def __init__(self, data, requires_grad=False):
        arr = np.asarray(data, dtype=np.float64)
        if arr.ndim != 4:
            raise ShapeError(f"tensor must be rank 4, got shape {arr.shape}")
        if not np.all(np.isfinite(arr)):
            raise ValueError("tensor data contains NaN/Inf")
        self.data = arr
        self.grad = None
        self.requires_grad = requires_grad
        self._parents = ()
        self._backward = None

    @property
    def shape(self):
        return self.data.shape

    def item(self):
        if self.data.size != 1:
            raise ShapeError(f"item() on non-scalar shape {self.shape}")
        return float(self.data.reshape(()))

    def detach(self):
        return Tensor(self.data.copy())

    def zero_grad(self):
        self.grad = None

    def _accumulate(self, g):
        if self.grad is None:
            self.grad = np.zeros_like(self.data)
        self.grad += g

    def backward(self):
        """Reverse-mode sweep from this (scalar) tensor."""
        if self._backward is None and not self._parents:
            raise TapeError("backward() called on a tensor with no recorded graph")
        if self.data.size != 1:
            raise ShapeError("backward() requires a scalar loss tensor")
        order = []
        seen = set()

        def visit(t):
            if id(t) in seen:
                return
            seen.add(id(t))
            for p in t._parents:
                visit(p)
            order.append(t)

        visit(self)
        self.grad = np.ones_like(self.data)
        for t in reversed(order):
            if t._backward is not None:
                t._backward()

    def __add__(self, other):
        return elementwise(self, other, "add")

    def __mul__(self, other):
        return elementwise(self, other, "mul")

    def __repr__(self):
        return f"Tensor(shape={self.shape}, requires_grad={self.requires_grad})"


def _result(data, parents, backward):
    out = Tensor(data)
    if _grad_enabled and any(p.requires_grad for p in parents):
        out.requires_grad = True
        out._parents = tuple(parents)
        out._backward = backward(out)
    return out


def _out_extent(n, k, s, p):
    return (n + 2 * p - k) // s + 1


def conv2d(x, weight, bias=None, stride=(1, 1), padding=(0, 0)):
    """2-D cross-correlation. weight: (out_ch, in_ch, kh, kw), bias: (out_ch,)."""
    n, ci, h, w = x.shape
    co, wci, kh, kw = weight.shape
    if wci != ci:
        raise ShapeError(f"conv2d: input channels {ci} != weight in_channels {wci}")
    sh, sw = stride
    ph, pw = padding
    oh = _out_extent(h, kh, sh, ph)
    ow = _out_extent(w, kw, sw, pw)
    if oh < 1 or ow < 1:
        raise ShapeError(f"conv2d: kernel {kh}x{kw} too large for input {h}x{w}")
    bvec = None
    if bias is not None:
        bvec = bias.data.reshape(-1)
        if bvec.shape[0] != co:
            raise ShapeError(f"conv2d: bias length {bvec.shape[0]} != out_channels {co}")

    wmat = weight.data.reshape(co, ci * kh * kw)
    nr_chunk = max(1, _CHUNK_ELEMS // max(1, ci * kh * kw * ow))
    out = np.empty((n, co, oh, ow))
    xps = []
    for b in range(n):
        xp = np.pad(x.data[b], ((0, 0), (ph, ph), (pw, pw)))
        xps.append(xp)
        for r0 in range(0, oh, nr_chunk):
            r1 = min(oh, r0 + nr_chunk)
            cols = K.im2col(xp, kh, kw, sh, sw, r0, r1)
            out[b, :, r0:r1, :] = (wmat @ cols).reshape(co, r1 - r0, ow)
    if bvec is not None:
        out += bvec[None, :, None, None]

    def make_backward(res):
        def backward():
            g = res.grad
            if bias is not None and bias.requires_grad:
                bias._accumulate(g.sum(axis=(0, 2, 3)).reshape(bias.shape))
            gw = np.zeros_like(wmat) if weight.requires_grad else None
            need_gx = x.requires_grad
            gx = np.empty_like(x.data) if need_gx else None
            for b in range(n):
                xp = xps[b]
                gxp = np.zeros_like(xp) if need_gx else None
                for r0 in range(0, oh, nr_chunk):
                    r1 = min(oh, r0 + nr_chunk)
                    gmat = np.ascontiguousarray(
                        g[b, :, r0:r1, :].reshape(co, (r1 - r0) * ow)
                    )
                    if gw is not None:
                        cols = K.im2col(xp, kh, kw, sh, sw, r0, r1)
                        gw += gmat @ cols.T
                    if need_gx:
                        gcols = np.ascontiguousarray(wmat.T @ gmat)
                        K.col2im_add(gxp, gcols, kh, kw, sh, sw, r0, r1)
                if need_gx:
                    gx[b] = gxp[:, ph : ph + h, pw : pw + w]
            if gw is not None:
                weight._accumulate(gw.reshape(weight.shape))
            if need_gx:
                x._accumulate(gx)

        return backward

    parents = [x, weight] + ([bias] if bias is not None else [])
    return _result(out, parents, make_backward)


def maxpool2d(x, kernel, stride=None):
    n, c, h, w = x.shape
    kh, kw = kernel
    sh, sw = stride if stride is not None else kernel
    if kh > h or kw > w:
        raise ShapeError(f"maxpool2d: kernel {kh}x{kw} larger than input {h}x{w}")
    oh = (h - kh) // sh + 1
    ow = (w - kw) // sw + 1
    out = np.empty((n, c, oh, ow))
    idxs = np.empty((n, c, oh, ow), dtype=np.int64)
    for b in range(n):
        xb = np.ascontiguousarray(x.data[b])
        out[b], idxs[b] = K.maxpool_forward(xb, kh, kw, sh, sw)

    def make_backward(res):
        def backward():
            if not x.requires_grad:
                return
            gx = np.empty_like(x.data)
            for b in range(n):
                gb = np.ascontiguousarray(res.grad[b])
                gx[b] = K.maxpool_backward(gb, idxs[b], h, w)
            x._accumulate(gx)

        return backward

    return _result(out, [x], make_backward)


def _resize_axis_coords(n_in, n_out):
    """Half-pixel-center bilinear source indices and blend weights."""
    src = (np.arange(n_out) + 0.5) * (n_in / n_out) - 0.5
    i0 = np.floor(src).astype(np.int64)
    t = src - i0
    i0c = np.clip(i0, 0, n_in - 1)
    i1c = np.clip(i0 + 1, 0, n_in - 1)
    return i0c, i1c, t


def resize_bilinear(x, out_h, out_w):
    """Bilinear resize of the spatial axes (half-pixel centers, edge clamp)."""
    if out_h < 1 or out_w < 1:
        raise ValueError("resize_bilinear: output extents must be >= 1")
    n, c, h, w = x.shape
    r0, r1, ty = _resize_axis_coords(h, out_h)
    c0, c1, tx = _resize_axis_coords(w, out_w)
    ty = ty[:, None]
    tx = tx[None, :]
    d = x.data
    out = (
        d[:, :, r0[:, None], c0[None, :]] * (1 - ty) * (1 - tx)
        + d[:, :, r0[:, None], c1[None, :]] * (1 - ty) * tx
        + d[:, :, r1[:, None], c0[None, :]] * ty * (1 - tx)
        + d[:, :, r1[:, None], c1[None, :]] * ty * tx
    )

    def make_backward(res):
        def backward():
            if not x.requires_grad:
                return
            g = res.grad
            gx = np.zeros_like(x.data)
            for rr, cc, wgt in (
                (r0, c0, (1 - ty) * (1 - tx)),
                (r0, c1, (1 - ty) * tx),
                (r1, c0, ty * (1 - tx)),
                (r1, c1, ty * tx),
            ):
                np.add.at(
                    gx,
                    (slice(None), slice(None), rr[:, None], cc[None, :]),
                    g * wgt,
                )
            x._accumulate(gx)

        return backward

    return _result(out, [x], make_backward)


def upsample(x, factor):
    """Integer-factor bilinear upsampling of both spatial axes."""
    if not isinstance(factor, int) or factor < 1:
        raise ValueError(f"upsample: factor must be a positive integer, got {factor}")
    if factor == 1:
        return x
    _, _, h, w = x.shape
    return resize_bilinear(x, h * factor, w * factor)


def relu(x):
    out = np.maximum(x.data, 0.0)

    def make_backward(res):
        mask = x.data > 0

        def backward():
            if x.requires_grad:
                x._accumulate(res.grad * mask)

        return backward

    return _result(out, [x], make_backward)


def sigmoid(x):
    out = 1.0 / (1.0 + np.exp(-x.data))

    def make_backward(res):
        def backward():
            if x.requires_grad:
                x._accumulate(res.grad * out * (1.0 - out))

        return backward

    return _result(out, [x], make_backward)


def activation(x, kind):
    if kind == "relu":
        return relu(x)
    if kind == "sigmoid":
        return sigmoid(x)
    raise ValueError(f"unknown activation kind {kind!r}")


def elementwise(a, b, op):
    """Elementwise add/mul; b may be single-channel and broadcast over a's channels."""
    if a.shape != b.shape:
        compatible = (
            b.shape[1] == 1
            and a.shape[0] == b.shape[0]
            and a.shape[2:] == b.shape[2:]
        )
        if not compatible:
            raise ShapeError(f"elementwise: incompatible shapes {a.shape} vs {b.shape}")
    if op == "add":
        out = a.data + b.data
    elif op == "mul":
        out = a.data * b.data
    else:
        raise ValueError(f"unknown elementwise op {op!r}")

    def make_backward(res):
        def backward():
            g = res.grad
            ga = g if op == "add" else g * b.data
            gb = g if op == "add" else g * a.data
            if a.requires_grad:
                a._accumulate(ga)
            if b.requires_grad:
                if b.shape != a.shape:
                    gb = gb.sum(axis=1, keepdims=True)
                b._accumulate(gb)

        return backward

    return _result(out, [a, b], make_backward)


def add_scalar(x, s):
    out = x.data + s

    def make_backward(res):
        def backward():
            if x.requires_grad:
                x._accumulate(res.grad)

        return backward

    return _result(out, [x], make_backward)


def scale(x, s):
    out = x.data * s

    def make_backward(res):
        def backward():
            if x.requires_grad:
                x._accumulate(res.grad * s)

        return backward

    return _result(out, [x], make_backward)


def tsum(x):
    """Sum of all elements, as a (1,1,1,1) scalar tensor."""
    out = np.array(x.data.sum(dtype=np.float64)).reshape(1, 1, 1, 1)

    def make_backward(res):
        def backward():
            if x.requires_grad:
                x._accumulate(np.full_like(x.data, res.grad.reshape(())))

        return backward

    return _result(out, [x], make_backward)

"""Pure-numpy implementations of the hot kernels.

All functions operate on a single image (C, H, W) in float64. Convolution
callers are expected to zero-pad the input themselves; `im2col`/`col2im_add`
work on the padded array and a half-open range [row0, row1) of output rows,
so large feature maps can be processed in chunks without materializing the
full column matrix.
"""

import numpy as np
from numpy.lib.stride_tricks import as_strided


def _windows(xp, kh, kw, sh, sw):
    c, hp, wp = xp.shape
    oh = (hp - kh) // sh + 1
    ow = (wp - kw) // sw + 1
    sc, srow, scol = xp.strides
    return as_strided(
        xp,
        shape=(c, oh, ow, kh, kw),
        strides=(sc, srow * sh, scol * sw, srow, scol),
        writeable=False,
    )


def im2col(xp, kh, kw, sh, sw, row0, row1):
    """Column matrix (C*kh*kw, (row1-row0)*OW) for output rows [row0, row1)."""
    win = _windows(xp, kh, kw, sh, sw)[:, row0:row1]
    c, nr, ow = win.shape[0], win.shape[1], win.shape[2]
    # (C, kh, kw, nr, OW) -> rows indexed by (c, i, j)
    cols = win.transpose(0, 3, 4, 1, 2).reshape(c * kh * kw, nr * ow)
    return np.ascontiguousarray(cols)


def col2im_add(gxp, gcols, kh, kw, sh, sw, row0, row1):
    """Scatter-add a column-matrix gradient back onto the padded input grad."""
    c = gxp.shape[0]
    ow = (gxp.shape[2] - kw) // sw + 1
    nr = row1 - row0
    g = gcols.reshape(c, kh, kw, nr, ow)
    for i in range(kh):
        r0 = row0 * sh + i
        for j in range(kw):
            gxp[:, r0 : r0 + nr * sh : sh, j : j + ow * sw : sw] += g[:, i, j]


def maxpool_forward(x, kh, kw, sh, sw):
    """Window maxima plus flat (row*W + col) argmax indices, first-wins ties."""
    c, h, w = x.shape
    win = _windows(x, kh, kw, sh, sw)
    oh, ow = win.shape[1], win.shape[2]
    flat = win.reshape(c, oh, ow, kh * kw)
    arg = flat.argmax(axis=3)
    out = np.take_along_axis(flat, arg[..., None], axis=3)[..., 0]
    rows = np.arange(oh)[None, :, None] * sh + arg // kw
    cols = np.arange(ow)[None, None, :] * sw + arg % kw
    idx = rows * w + cols
    return np.ascontiguousarray(out), idx.astype(np.int64)


def maxpool_backward(gout, idx, h, w):
    c = gout.shape[0]
    gx = np.zeros((c, h * w))
    ofs = np.arange(c)[:, None, None] * (h * w)
    np.add.at(gx.ravel(), (idx + ofs).ravel(), gout.ravel())
    return gx.reshape(c, h, w)

# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled versions of the hot kernels (see pure.py for the contracts)."""

import numpy as np
cimport numpy as cnp

cnp.import_array()


def im2col(double[:, :, ::1] xp, int kh, int kw, int sh, int sw,
           int row0, int row1):
    cdef int c = xp.shape[0]
    cdef int wp = xp.shape[2]
    cdef int ow = (wp - kw) // sw + 1
    cdef int nr = row1 - row0
    out = np.empty((c * kh * kw, nr * ow), dtype=np.float64)
    cdef double[:, ::1] cols = out
    cdef int ci, i, j, r, q, base_r, row_idx
    for ci in range(c):
        for i in range(kh):
            for j in range(kw):
                row_idx = (ci * kh + i) * kw + j
                for r in range(nr):
                    base_r = (row0 + r) * sh + i
                    for q in range(ow):
                        cols[row_idx, r * ow + q] = xp[ci, base_r, q * sw + j]
    return out


def col2im_add(double[:, :, ::1] gxp, double[:, ::1] gcols,
               int kh, int kw, int sh, int sw, int row0, int row1):
    cdef int c = gxp.shape[0]
    cdef int wp = gxp.shape[2]
    cdef int ow = (wp - kw) // sw + 1
    cdef int nr = row1 - row0
    cdef int ci, i, j, r, q, base_r, row_idx
    for ci in range(c):
        for i in range(kh):
            for j in range(kw):
                row_idx = (ci * kh + i) * kw + j
                for r in range(nr):
                    base_r = (row0 + r) * sh + i
                    for q in range(ow):
                        gxp[ci, base_r, q * sw + j] += gcols[row_idx, r * ow + q]


def maxpool_forward(double[:, :, ::1] x, int kh, int kw, int sh, int sw):
    cdef int c = x.shape[0]
    cdef int h = x.shape[1]
    cdef int w = x.shape[2]
    cdef int oh = (h - kh) // sh + 1
    cdef int ow = (w - kw) // sw + 1
    out_arr = np.empty((c, oh, ow), dtype=np.float64)
    idx_arr = np.empty((c, oh, ow), dtype=np.int64)
    cdef double[:, :, ::1] out = out_arr
    cdef long long[:, :, ::1] idx = idx_arr
    cdef int ci, r, q, i, j, rr, cc
    cdef double best, v
    cdef long long best_idx
    for ci in range(c):
        for r in range(oh):
            for q in range(ow):
                best = x[ci, r * sh, q * sw]
                best_idx = (r * sh) * w + q * sw
                for i in range(kh):
                    rr = r * sh + i
                    for j in range(kw):
                        cc = q * sw + j
                        v = x[ci, rr, cc]
                        if v > best:
                            best = v
                            best_idx = rr * w + cc
                out[ci, r, q] = best
                idx[ci, r, q] = best_idx
    return out_arr, idx_arr


def maxpool_backward(double[:, :, ::1] gout, long long[:, :, ::1] idx,
                     int h, int w):
    cdef int c = gout.shape[0]
    cdef int oh = gout.shape[1]
    cdef int ow = gout.shape[2]
    gx_arr = np.zeros((c, h, w), dtype=np.float64)
    cdef double[:, :, ::1] gx = gx_arr
    cdef int ci, r, q
    cdef long long f
    for ci in range(c):
        for r in range(oh):
            for q in range(ow):
                f = idx[ci, r, q]
                gx[ci, f // w, f % w] += gout[ci, r, q]
    return gx_arr

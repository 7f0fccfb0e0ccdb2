# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled hot kernels: 'same' 2-D convolution (forward and kernel gradient)
and the partial DFT used for period detection.

The convolutions gather only in-range taps in C and hand the product to BLAS.

Signatures and semantics mirror ``_kernels_py``; inputs are C-contiguous
float64 arrays.
"""

import numpy as np
cimport numpy as cnp
from libc.math cimport cos, sin, M_PI
from libc.string cimport memcpy
from scipy.linalg.cython_blas cimport dgemm

cnp.import_array()


cdef object _im2col(const double[:, :, :, ::1] x, Py_ssize_t ry, Py_ssize_t rx):
    # rows: output pixels (b, y, x); columns: taps (a, c, ci); out-of-range taps stay zero
    cdef Py_ssize_t nb = x.shape[0], h = x.shape[1], w = x.shape[2], cin = x.shape[3]
    cdef Py_ssize_t ekh = 2 * ry + 1, ekw = 2 * rx + 1
    cdef Py_ssize_t ncol = ekh * ekw * cin
    cdef Py_ssize_t b, y, xx, a, c, iy, ix, row
    cols_arr = np.zeros((nb * h * w, ncol))
    cdef double[:, ::1] cols = cols_arr
    row = 0
    for b in range(nb):
        for y in range(h):
            for xx in range(w):
                for a in range(ekh):
                    iy = y + a - ry
                    if iy < 0 or iy >= h:
                        continue
                    for c in range(ekw):
                        ix = xx + c - rx
                        if ix < 0 or ix >= w:
                            continue
                        memcpy(&cols[row, (a * ekw + c) * cin], &x[b, iy, ix, 0],
                               cin * sizeof(double))
                row += 1
    return cols_arr


def conv2d_same(const double[:, :, :, ::1] x, const double[:, :, :, ::1] kernel):
    cdef Py_ssize_t nb = x.shape[0], h = x.shape[1], w = x.shape[2], cin = x.shape[3]
    cdef Py_ssize_t kh = kernel.shape[0], kw = kernel.shape[1], cout = kernel.shape[3]
    cdef Py_ssize_t cy = kh // 2, cx = kw // 2
    cdef Py_ssize_t ry = min(cy, h - 1), rx = min(cx, w - 1)
    keff_arr = np.ascontiguousarray(
        np.asarray(kernel)[cy - ry:cy + ry + 1, cx - rx:cx + rx + 1]).reshape(-1, cout)
    cols_arr = _im2col(x, ry, rx)
    out_arr = np.empty((nb, h, w, cout))
    cdef double[:, ::1] keff = keff_arr
    cdef double[:, ::1] cols = cols_arr
    cdef double[:, :, :, ::1] out = out_arr
    cdef int m = <int>(nb * h * w), n = <int>cout, k = <int>keff_arr.shape[0]
    cdef double one = 1.0, zero = 0.0
    # row-major out(m x n) = cols(m x k) @ keff(k x n), expressed column-major
    dgemm("N", "N", &n, &m, &k, &one, &keff[0, 0], &n, &cols[0, 0], &k, &zero,
          &out[0, 0, 0, 0], &n)
    return out_arr


def conv2d_same_kernel_grad(const double[:, :, :, ::1] x,
                            const double[:, :, :, ::1] grad_out,
                            Py_ssize_t kh, Py_ssize_t kw):
    cdef Py_ssize_t nb = x.shape[0], h = x.shape[1], w = x.shape[2], cin = x.shape[3]
    cdef Py_ssize_t cout = grad_out.shape[3]
    cdef Py_ssize_t cy = kh // 2, cx = kw // 2
    cdef Py_ssize_t ry = min(cy, h - 1), rx = min(cx, w - 1)
    cols_arr = _im2col(x, ry, rx)
    geff_arr = np.empty((cols_arr.shape[1], cout))
    cdef double[:, ::1] cols = cols_arr
    cdef double[:, ::1] geff = geff_arr
    cdef int m = <int>(nb * h * w), n = <int>cout, k = <int>cols_arr.shape[1]
    cdef double one = 1.0, zero = 0.0
    # row-major geff(k x n) = cols^T(k x m) @ grad_out(m x n)
    dgemm("N", "T", &n, &k, &m, &one, &grad_out[0, 0, 0, 0], &n, &cols[0, 0], &k, &zero,
          &geff[0, 0], &n)
    grad = np.zeros((kh, kw, cin, cout))
    grad[cy - ry:cy + ry + 1, cx - rx:cx + rx + 1] = geff_arr.reshape(2 * ry + 1, 2 * rx + 1, cin, cout)
    return grad


def dft_parts(const double[:, :, ::1] x, Py_ssize_t n_freq):
    cdef Py_ssize_t nb = x.shape[0], t = x.shape[1], d = x.shape[2]
    cdef Py_ssize_t b, f, s, j
    cdef double cs, sn, v
    re_arr = np.zeros((nb, n_freq, d))
    im_arr = np.zeros((nb, n_freq, d))
    cdef double[:, :, ::1] re = re_arr
    cdef double[:, :, ::1] im = im_arr
    cos_arr = np.empty((n_freq, t))
    sin_arr = np.empty((n_freq, t))
    cdef double[:, ::1] ctab = cos_arr
    cdef double[:, ::1] stab = sin_arr
    for f in range(n_freq):
        for s in range(t):
            # reduce the phase index mod t so large f*s stays exact
            ctab[f, s] = cos(2.0 * M_PI * (((f + 1) * s) % t) / t)
            stab[f, s] = sin(2.0 * M_PI * (((f + 1) * s) % t) / t)
    for b in range(nb):
        for f in range(n_freq):
            for s in range(t):
                cs = ctab[f, s]
                sn = stab[f, s]
                for j in range(d):
                    v = x[b, s, j]
                    re[b, f, j] += v * cs
                    im[b, f, j] -= v * sn
    return re_arr, im_arr

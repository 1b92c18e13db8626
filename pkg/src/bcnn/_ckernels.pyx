# cython: language_level=3
"""Compiled inner loops for convolution, max pooling and dense layers.

All routines take C-contiguous float64 arrays and accumulate in a fixed
order, so results are bit-identical to :mod:`bcnn._pykernels`.
"""

import numpy as np
cimport numpy as cnp

cnp.import_array()

ctypedef cnp.float64_t f64
ctypedef cnp.int64_t i64


def conv2d_forward(const f64[:, :, ::1] padded, const f64[:, :, :, ::1] weights,
                   const f64[::1] bias):
    """Same-size correlation of a pre-padded input.

    Each output element is ``bias[o]`` followed by the taps added one by one
    in (channel, dy, dx) order.
    """
    cdef Py_ssize_t n_out = weights.shape[0], n_in = weights.shape[1]
    cdef Py_ssize_t k = weights.shape[2]
    cdef Py_ssize_t h = padded.shape[1] - k + 1, w = padded.shape[2] - k + 1
    out_arr = np.empty((n_out, h, w), dtype=np.float64)
    cdef f64[:, :, ::1] out = out_arr
    cdef Py_ssize_t o, c, dy, dx, y, x
    cdef f64 wv
    with nogil:
        for o in range(n_out):
            for y in range(h):
                for x in range(w):
                    out[o, y, x] = bias[o]
            for c in range(n_in):
                for dy in range(k):
                    for dx in range(k):
                        wv = weights[o, c, dy, dx]
                        for y in range(h):
                            for x in range(w):
                                out[o, y, x] = out[o, y, x] + wv * padded[c, y + dy, x + dx]
    return out_arr


def conv2d_backward_input(const f64[:, :, ::1] grad_out, const f64[:, :, :, ::1] weights):
    """Scatter ``grad_out`` through the kernel taps into a padded-size buffer."""
    cdef Py_ssize_t n_out = weights.shape[0], n_in = weights.shape[1]
    cdef Py_ssize_t k = weights.shape[2]
    cdef Py_ssize_t h = grad_out.shape[1], w = grad_out.shape[2]
    gp_arr = np.zeros((n_in, h + k - 1, w + k - 1), dtype=np.float64)
    cdef f64[:, :, ::1] gp = gp_arr
    cdef Py_ssize_t o, c, dy, dx, y, x
    cdef f64 wv
    with nogil:
        for c in range(n_in):
            for o in range(n_out):
                for dy in range(k):
                    for dx in range(k):
                        wv = weights[o, c, dy, dx]
                        for y in range(h):
                            for x in range(w):
                                gp[c, y + dy, x + dx] = gp[c, y + dy, x + dx] + wv * grad_out[o, y, x]
    return gp_arr


def maxpool_forward(const f64[:, :, ::1] inp):
    cdef Py_ssize_t n_ch = inp.shape[0], h = inp.shape[1], w = inp.shape[2]
    cdef Py_ssize_t oh = h // 2, ow = w // 2
    out_arr = np.empty((n_ch, oh, ow), dtype=np.float64)
    idx_arr = np.empty((n_ch, oh, ow), dtype=np.int64)
    cdef f64[:, :, ::1] out = out_arr
    cdef i64[:, :, ::1] idx = idx_arr
    cdef Py_ssize_t c, y, x, yy, xx, best_y, best_x
    cdef f64 best, v
    with nogil:
        for c in range(n_ch):
            for y in range(oh):
                for x in range(ow):
                    best_y = 2 * y
                    best_x = 2 * x
                    best = inp[c, best_y, best_x]
                    for yy in range(2 * y, 2 * y + 2):
                        for xx in range(2 * x, 2 * x + 2):
                            v = inp[c, yy, xx]
                            # strict > keeps the first maximum in scan order
                            if v > best:
                                best = v
                                best_y = yy
                                best_x = xx
                    out[c, y, x] = best
                    idx[c, y, x] = (c * h + best_y) * w + best_x
    return out_arr, idx_arr


def maxpool_backward(const i64[:, :, ::1] idx, const f64[:, :, ::1] grad_out,
                     Py_ssize_t size):
    grad_arr = np.zeros(size, dtype=np.float64)
    cdef f64[::1] grad = grad_arr
    cdef Py_ssize_t c, y, x
    with nogil:
        for c in range(idx.shape[0]):
            for y in range(idx.shape[1]):
                for x in range(idx.shape[2]):
                    grad[idx[c, y, x]] += grad_out[c, y, x]
    return grad_arr


def dense_forward(const f64[::1] inp, const f64[:, ::1] weights, const f64[::1] bias):
    cdef Py_ssize_t n_out = weights.shape[0], n_in = weights.shape[1]
    out_arr = np.empty(n_out, dtype=np.float64)
    cdef f64[::1] out = out_arr
    cdef Py_ssize_t j, k
    cdef f64 acc
    with nogil:
        for j in range(n_out):
            acc = bias[j]
            for k in range(n_in):
                acc = acc + weights[j, k] * inp[k]
            out[j] = acc
    return out_arr

# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled hot loops: patch extraction for convolution and the assignment solver."""

import numpy as np
cimport numpy as cnp
from cython cimport floating
from libc.math cimport INFINITY

cnp.import_array()


cdef inline (Py_ssize_t, Py_ssize_t) _col_range(Py_ssize_t kj, Py_ssize_t stride,
                                               Py_ssize_t pad, Py_ssize_t w,
                                               Py_ssize_t wo) noexcept nogil:
    # output columns j whose input column j*stride - pad + kj lies in [0, w)
    cdef Py_ssize_t lo = 0, hi = wo
    while lo < wo and lo * stride - pad + kj < 0:
        lo += 1
    while hi > lo and (hi - 1) * stride - pad + kj >= w:
        hi -= 1
    return lo, hi


def im2col(floating[:, :, :, ::1] x, int k, int stride, int pad):
    cdef Py_ssize_t n_img = x.shape[0], chans = x.shape[1]
    cdef Py_ssize_t h = x.shape[2], w = x.shape[3]
    cdef Py_ssize_t ho = (h + 2 * pad - k) // stride + 1
    cdef Py_ssize_t wo = (w + 2 * pad - k) // stride + 1
    dtype = np.float32 if floating is float else np.float64
    out_arr = np.zeros((chans * k * k, n_img * ho * wo), dtype=dtype)
    cdef floating[:, ::1] out = out_arr
    cdef Py_ssize_t c, ki, kj, n, i, j, row, col, y, j_lo, j_hi
    with nogil:
        for c in range(chans):
            for ki in range(k):
                for kj in range(k):
                    row = (c * k + ki) * k + kj
                    j_lo, j_hi = _col_range(kj, stride, pad, w, wo)
                    for n in range(n_img):
                        for i in range(ho):
                            y = i * stride - pad + ki
                            if y < 0 or y >= h:
                                continue
                            col = (n * ho + i) * wo
                            for j in range(j_lo, j_hi):
                                out[row, col + j] = x[n, c, y, j * stride - pad + kj]
    return out_arr


def col2im(floating[:, ::1] cols, int n_img, int chans, int h, int w,
           int k, int stride, int pad):
    cdef Py_ssize_t ho = (h + 2 * pad - k) // stride + 1
    cdef Py_ssize_t wo = (w + 2 * pad - k) // stride + 1
    if cols.shape[0] != chans * k * k or cols.shape[1] != n_img * ho * wo:
        raise ValueError("column buffer does not match the requested geometry")
    dtype = np.float32 if floating is float else np.float64
    out_arr = np.zeros((n_img, chans, h, w), dtype=dtype)
    cdef floating[:, :, :, ::1] out = out_arr
    cdef Py_ssize_t c, ki, kj, n, i, j, row, col, y, j_lo, j_hi
    with nogil:
        for c in range(chans):
            for ki in range(k):
                for kj in range(k):
                    row = (c * k + ki) * k + kj
                    j_lo, j_hi = _col_range(kj, stride, pad, w, wo)
                    for n in range(n_img):
                        for i in range(ho):
                            y = i * stride - pad + ki
                            if y < 0 or y >= h:
                                continue
                            col = (n * ho + i) * wo
                            for j in range(j_lo, j_hi):
                                out[n, c, y, j * stride - pad + kj] += cols[row, col + j]
    return out_arr


def linear_assignment(double[:, ::1] cost):
    """Min-cost assignment of every row to a distinct column (rows <= cols).

    Shortest augmenting path with dual potentials; ties go to the lowest column.
    """
    cdef Py_ssize_t n = cost.shape[0], m = cost.shape[1]
    if n > m:
        raise ValueError("linear_assignment needs rows <= cols")
    u_arr = np.zeros(n + 1)
    v_arr = np.zeros(m + 1)
    p_arr = np.zeros(m + 1, dtype=np.intp)
    way_arr = np.zeros(m + 1, dtype=np.intp)
    minv_arr = np.empty(m + 1)
    used_arr = np.empty(m + 1, dtype=np.uint8)
    cdef double[::1] u = u_arr, v = v_arr, minv = minv_arr
    cdef Py_ssize_t[::1] p = p_arr, way = way_arr
    cdef unsigned char[::1] used = used_arr
    cdef Py_ssize_t i, j, i0, j0, j1
    cdef double delta, cur
    with nogil:
        for i in range(1, n + 1):
            p[0] = i
            j0 = 0
            for j in range(m + 1):
                minv[j] = INFINITY
                used[j] = 0
            while True:
                used[j0] = 1
                i0 = p[j0]
                delta = INFINITY
                j1 = 0
                for j in range(1, m + 1):
                    if not used[j]:
                        cur = cost[i0 - 1, j - 1] - u[i0] - v[j]
                        if cur < minv[j]:
                            minv[j] = cur
                            way[j] = j0
                        if minv[j] < delta:
                            delta = minv[j]
                            j1 = j
                for j in range(m + 1):
                    if used[j]:
                        u[p[j]] += delta
                        v[j] -= delta
                    else:
                        minv[j] -= delta
                j0 = j1
                if p[j0] == 0:
                    break
            while True:
                j1 = way[j0]
                p[j0] = p[j1]
                j0 = j1
                if j0 == 0:
                    break
    result = np.full(n, -1, dtype=np.intp)
    for j in range(1, m + 1):
        if p_arr[j] != 0:
            result[p_arr[j] - 1] = j - 1
    return result

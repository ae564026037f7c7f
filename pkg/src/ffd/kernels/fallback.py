"""Pure-Python/numpy versions of the compiled kernels.

Same signatures and results as ``_ckernels``; used when the extension is not
built or when ``FFD_PURE_PYTHON=1``.
"""

import math

import numpy as np


def _out_size(n, k, stride, pad):
    return (n + 2 * pad - k) // stride + 1


def im2col(x, k, stride, pad):
    n_img, chans, h, w = x.shape
    ho, wo = _out_size(h, k, stride, pad), _out_size(w, k, stride, pad)
    if k == 1 and stride == 1 and pad == 0:
        return np.ascontiguousarray(x.transpose(1, 0, 2, 3).reshape(chans, -1))
    xp = np.pad(x, ((0, 0), (0, 0), (pad, pad), (pad, pad)))
    cols = np.empty((chans, k, k, n_img, ho, wo), dtype=x.dtype)
    for ki in range(k):
        for kj in range(k):
            patch = xp[:, :, ki:ki + stride * ho:stride, kj:kj + stride * wo:stride]
            cols[:, ki, kj] = patch.transpose(1, 0, 2, 3)
    return cols.reshape(chans * k * k, n_img * ho * wo)


def col2im(cols, n_img, chans, h, w, k, stride, pad):
    ho, wo = _out_size(h, k, stride, pad), _out_size(w, k, stride, pad)
    if cols.shape != (chans * k * k, n_img * ho * wo):
        raise ValueError("column buffer does not match the requested geometry")
    if k == 1 and stride == 1 and pad == 0:
        return np.ascontiguousarray(cols.reshape(chans, n_img, h, w).transpose(1, 0, 2, 3))
    blocks = cols.reshape(chans, k, k, n_img, ho, wo)
    out = np.zeros((n_img, chans, h + 2 * pad, w + 2 * pad), dtype=cols.dtype)
    for ki in range(k):
        for kj in range(k):
            out[:, :, ki:ki + stride * ho:stride, kj:kj + stride * wo:stride] += \
                blocks[:, ki, kj].transpose(1, 0, 2, 3)
    return np.ascontiguousarray(out[:, :, pad:pad + h, pad:pad + w])


def linear_assignment(cost):
    """Min-cost assignment of every row to a distinct column (rows <= cols).

    Shortest augmenting path with dual potentials; ties go to the lowest column.
    """
    a = np.asarray(cost, dtype=np.float64).tolist()
    n = len(a)
    m = len(a[0]) if n else 0
    if n > m:
        raise ValueError("linear_assignment needs rows <= cols")
    inf = math.inf
    u = [0.0] * (n + 1)
    v = [0.0] * (m + 1)
    p = [0] * (m + 1)
    way = [0] * (m + 1)
    for i in range(1, n + 1):
        p[0] = i
        j0 = 0
        minv = [inf] * (m + 1)
        used = [False] * (m + 1)
        while True:
            used[j0] = True
            i0 = p[j0]
            row = a[i0 - 1]
            ui0 = u[i0]
            delta = inf
            j1 = 0
            for j in range(1, m + 1):
                if not used[j]:
                    cur = row[j - 1] - ui0 - v[j]
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
        if p[j]:
            result[p[j] - 1] = j - 1
    return result

"""Hot kernels with a compiled backend and a pure-Python fallback.

The backend is chosen once at import: the Cython extension when it is built,
otherwise :mod:`ffd.kernels.fallback`. Set ``FFD_PURE_PYTHON=1`` to force the
fallback.
"""

import os

import numpy as np

from . import fallback

_compiled = None
if not os.environ.get("FFD_PURE_PYTHON"):
    try:
        from . import _ckernels as _compiled
    except ImportError:
        _compiled = None

BACKEND = "cython" if _compiled is not None else "python"
HAS_COMPILED = _compiled is not None


def backend_module(name=None):
    """Return the kernel module for ``name`` ('cython', 'python' or None for active)."""
    name = name or BACKEND
    if name == "python":
        return fallback
    if name == "cython":
        if _compiled is None:
            raise RuntimeError("compiled kernels are not available")
        return _compiled
    raise ValueError(f"unknown kernel backend {name!r}")


_active = backend_module()


def im2col(x, k, stride, pad):
    """Unfold ``x`` (N, C, H, W) into (C*k*k, N*Ho*Wo) columns."""
    return _active.im2col(np.ascontiguousarray(x), int(k), int(stride), int(pad))


def col2im(cols, n_img, chans, h, w, k, stride, pad):
    """Adjoint of :func:`im2col`: scatter-add columns back to (N, C, H, W)."""
    return _active.col2im(np.ascontiguousarray(cols), int(n_img), int(chans), int(h),
                          int(w), int(k), int(stride), int(pad))


def linear_assignment(cost):
    """Column index per row of a min-cost injection rows -> cols (rows <= cols)."""
    cost = np.ascontiguousarray(cost, dtype=np.float64)
    if cost.shape[0] == 0:
        return np.zeros(0, dtype=np.intp)
    return _active.linear_assignment(cost)

"""Timing of the compiled kernels against the pure-Python fallback, and of the forward pass."""

import time

import numpy as np

from . import kernels
from . import numerics as nx


def _best_of(fn, repeat):
    best = float("inf")
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t0)
    return best


def kernel_timings(repeat=5, seed=0):
    """{kernel: {backend: seconds}} for representative detector-sized inputs."""
    rng = np.random.default_rng(seed)
    x = rng.standard_normal((10, 16, 32, 32)).astype(np.float32)
    cols = kernels.fallback.im2col(x, 3, 1, 1)
    costs = [rng.uniform(0, 50, size=(3, 10)) for _ in range(200)]
    backends = ["python"] + (["cython"] if kernels.HAS_COMPILED else [])
    out = {"im2col": {}, "col2im": {}, "linear_assignment": {}}
    for name in backends:
        mod = kernels.backend_module(name)
        out["im2col"][name] = _best_of(lambda: mod.im2col(x, 3, 1, 1), repeat)
        out["col2im"][name] = _best_of(lambda: mod.col2im(cols, 10, 16, 32, 32, 3, 1, 1), repeat)
        out["linear_assignment"][name] = _best_of(
            lambda: [mod.linear_assignment(c) for c in costs], repeat)
    return out


def forward_timing(model, size, repeat=5, seed=0):
    """Best-of eval-mode forward time (seconds) for one H×W image."""
    h, w = size
    img = nx.Tensor(np.random.default_rng(seed).uniform(0, 1, (3, h, w)).astype(np.float32))
    model.forward(img, mode="eval")
    return _best_of(lambda: model.forward(img, mode="eval"), repeat)

"""Differentiable primitives.

Feature maps are C×H×W or N×C×H×W (row-major). Each primitive returns a new
:class:`Tensor`; gradients flow through the node recorded on it.
"""

import numpy as np

from .. import kernels
from ..errors import DimensionError
from .tensor import Tensor, as_tensor, record

BN_EPS = 1e-5
BN_MOMENTUM = 0.1


def _as_batched(x):
    if x.ndim == 3:
        return x[None], True
    if x.ndim == 4:
        return x, False
    raise DimensionError("expected a C×H×W or N×C×H×W tensor", axis="ndim", expected="3 or 4",
                         got=x.ndim)


def _common_dtype(*arrays):
    return np.result_type(*[a.dtype for a in arrays])


def conv2d(x, weight, bias=None, stride=1, padding=None):
    """2-D cross-correlation; ``padding`` defaults to (k-1)//2 ("same" at stride 1)."""
    x, weight = as_tensor(x), as_tensor(weight)
    xb, squeeze = _as_batched(x.data)
    if weight.ndim != 4:
        raise DimensionError("conv weight must be C_out×C_in×k×k", axis="ndim", expected=4,
                             got=weight.ndim)
    c_out, c_in, kh, kw = weight.shape
    n_img, chans, h, w = xb.shape
    if chans != c_in:
        raise DimensionError("input channels do not match conv weight", axis="channel",
                             expected=c_in, got=chans)
    if kh != kw:
        raise DimensionError("conv kernel must be square", axis="kernel", expected=kh, got=kw)
    if bias is not None:
        bias = as_tensor(bias)
        if bias.shape != (c_out,):
            raise DimensionError("conv bias must have one entry per output channel",
                                 axis="channel", expected=(c_out,), got=bias.shape)
    k = kh
    pad = (k - 1) // 2 if padding is None else int(padding)
    stride = int(stride)
    ho = (h + 2 * pad - k) // stride + 1
    wo = (w + 2 * pad - k) // stride + 1
    if ho < 1 or wo < 1:
        raise DimensionError("input too small for kernel", axis="spatial", expected=f">={k}",
                             got=(h, w))
    dtype = _common_dtype(xb, weight.data) if bias is None else \
        _common_dtype(xb, weight.data, bias.data)
    xb = xb.astype(dtype, copy=False)
    wmat = weight.data.astype(dtype, copy=False).reshape(c_out, -1)
    cols = kernels.im2col(xb, k, stride, pad)
    out = wmat @ cols
    if bias is not None:
        out += bias.data.astype(dtype, copy=False)[:, None]
    out = out.reshape(c_out, n_img, ho, wo).transpose(1, 0, 2, 3)
    out = np.ascontiguousarray(out[0] if squeeze else out)

    inputs = (x, weight) if bias is None else (x, weight, bias)

    def backward_fn(g):
        gb = g[None] if squeeze else g
        gmat = gb.transpose(1, 0, 2, 3).reshape(c_out, -1)
        gx = gw = gbias = None
        if x.requires_grad:
            gcols = wmat.T @ gmat
            gx = kernels.col2im(gcols, n_img, chans, h, w, k, stride, pad)
            gx = gx[0] if squeeze else gx
        if weight.requires_grad:
            gw = (gmat @ cols.T).reshape(weight.shape)
        if bias is not None and bias.requires_grad:
            gbias = gmat.sum(axis=1)
        return (gx, gw) if bias is None else (gx, gw, gbias)

    return record("conv2d", inputs, out, backward_fn)


def batch_norm(x, gamma, beta, running_mean, running_var, mode="train", eps=BN_EPS,
               momentum=BN_MOMENTUM):
    """Per-channel normalisation.

    ``running_mean``/``running_var`` are numpy buffers; train mode updates them
    in place with ``momentum`` (unbiased variance, as is customary).
    """
    if eps <= 0:
        raise ValueError("batch_norm epsilon must be positive")
    x, gamma, beta = as_tensor(x), as_tensor(gamma), as_tensor(beta)
    xb, squeeze = _as_batched(x.data)
    n_img, chans, h, w = xb.shape
    count = n_img * h * w
    if h * w == 0:
        raise DimensionError("batch_norm needs a nonzero spatial extent", axis="spatial",
                             got=(h, w))
    if gamma.shape != (chans,) or beta.shape != (chans,):
        raise DimensionError("batch_norm affine parameters must match channels",
                             axis="channel", expected=(chans,), got=gamma.shape)
    dtype = _common_dtype(xb, gamma.data, beta.data)
    xb = xb.astype(dtype, copy=False)
    g = gamma.data.astype(dtype, copy=False)[None, :, None, None]
    b = beta.data.astype(dtype, copy=False)[None, :, None, None]
    if mode == "train":
        mean = xb.mean(axis=(0, 2, 3))
        var = xb.var(axis=(0, 2, 3))
        unbiased = var * count / (count - 1) if count > 1 else var
        running_mean *= 1.0 - momentum
        running_mean += momentum * mean
        running_var *= 1.0 - momentum
        running_var += momentum * unbiased
    elif mode == "eval":
        mean = np.asarray(running_mean, dtype=dtype)
        var = np.asarray(running_var, dtype=dtype)
    else:
        raise ValueError(f"unknown batch_norm mode {mode!r}")
    inv_std = (1.0 / np.sqrt(var + eps)).astype(dtype)[None, :, None, None]
    xhat = (xb - mean.astype(dtype)[None, :, None, None]) * inv_std
    out = xhat * g + b
    out = out[0] if squeeze else out

    def backward_fn(gout):
        gb = gout[None] if squeeze else gout
        ggamma = (gb * xhat).sum(axis=(0, 2, 3)) if gamma.requires_grad else None
        gbeta = gb.sum(axis=(0, 2, 3)) if beta.requires_grad else None
        gx = None
        if x.requires_grad:
            gxhat = gb * g
            if mode == "train":
                s1 = gxhat.sum(axis=(0, 2, 3), keepdims=True)
                s2 = (gxhat * xhat).sum(axis=(0, 2, 3), keepdims=True)
                gx = inv_std * (gxhat - s1 / count - xhat * s2 / count)
            else:
                gx = gxhat * inv_std
            gx = gx[0] if squeeze else gx
        return gx, ggamma, gbeta

    return record("batch_norm", (x, gamma, beta), np.ascontiguousarray(out), backward_fn)


def relu(x):
    """max(x, 0); the subgradient at 0 is 0."""
    x = as_tensor(x)
    active = x.data > 0
    out = np.where(active, x.data, 0).astype(x.dtype)

    def backward_fn(g):
        return (g * active,)

    return record("relu", (x,), out, backward_fn, branch=active)


def _sigmoid(v):
    return np.exp(-np.logaddexp(0, -v)).astype(v.dtype)


def sigmoid(x):
    x = as_tensor(x)
    out = _sigmoid(x.data)

    def backward_fn(g):
        return (g * out * (1 - out),)

    return record("sigmoid", (x,), out, backward_fn)


def _channel_axis(ndim):
    return 1 if ndim == 4 else 0


def softmax_channels(x):
    """Softmax across the channel axis (axis 1 for N×C×H×W, else axis 0)."""
    x = as_tensor(x)
    if x.ndim == 0:
        raise DimensionError("softmax_channels needs a channel axis", axis="ndim",
                             expected=">=1", got=0)
    axis = _channel_axis(x.ndim)
    shifted = x.data - x.data.max(axis=axis, keepdims=True)
    e = np.exp(shifted)
    out = (e / e.sum(axis=axis, keepdims=True)).astype(x.dtype)

    def backward_fn(g):
        return (out * (g - (g * out).sum(axis=axis, keepdims=True)),)

    return record("softmax_channels", (x,), out, backward_fn)


def activation(x, kind):
    if kind == "relu":
        return relu(x)
    if kind == "sigmoid":
        return sigmoid(x)
    if kind in ("softmax", "softmax_channels", "softmaxChannels"):
        return softmax_channels(x)
    raise ValueError(f"unknown activation {kind!r}")


def global_avg_pool(x):
    """Spatial mean per channel: C×H×W -> C, N×C×H×W -> N×C."""
    x = as_tensor(x)
    xb, squeeze = _as_batched(x.data)
    n_img, chans, h, w = xb.shape
    if h * w < 1:
        raise DimensionError("global_avg_pool needs at least one spatial site", axis="spatial",
                             got=(h, w))
    out = xb.mean(axis=(2, 3))
    out = out[0] if squeeze else out

    def backward_fn(g):
        gb = g[None] if squeeze else g
        gx = np.broadcast_to(gb[:, :, None, None] / (h * w), xb.shape).astype(x.dtype)
        return (gx[0] if squeeze else gx,)

    return record("global_avg_pool", (x,), np.ascontiguousarray(out), backward_fn)


def broadcast_mul(a, b):
    """out[..., c, h, w] = a[..., c, h, w] * b[..., c]."""
    a, b = as_tensor(a), as_tensor(b)
    if a.ndim - b.ndim != 2 or a.shape[:-2] != b.shape:
        raise DimensionError("broadcast_mul needs one gate per channel", axis="channel",
                             expected=a.shape[:-2], got=b.shape)
    bb = b.data[..., None, None]
    out = a.data * bb

    def backward_fn(g):
        ga = g * bb if a.requires_grad else None
        gb = (g * a.data).sum(axis=(-2, -1)) if b.requires_grad else None
        return ga, gb

    return record("broadcast_mul", (a, b), out, backward_fn)


def _check_same_shape(a, b, op):
    if a.shape != b.shape:
        axis = next((i for i, (p, q) in enumerate(zip(a.shape, b.shape)) if p != q), "ndim")
        raise DimensionError(f"{op} needs identical shapes", axis=axis, expected=a.shape,
                             got=b.shape)


def add(a, b):
    a, b = as_tensor(a), as_tensor(b)
    _check_same_shape(a, b, "add")
    return record("add", (a, b), a.data + b.data, lambda g: (g, g))


def mul(a, b):
    a, b = as_tensor(a), as_tensor(b)
    _check_same_shape(a, b, "mul")
    return record("mul", (a, b), a.data * b.data, lambda g: (g * b.data, g * a.data))


def scale(x, factor):
    x = as_tensor(x)
    return record("scale", (x,), x.data * x.dtype.type(factor), lambda g: (g * factor,))


def sum_all(x):
    x = as_tensor(x)
    out = np.asarray(x.data.sum(), dtype=x.dtype)
    return record("sum", (x,), out, lambda g: (np.broadcast_to(g, x.shape).astype(x.dtype),))


def reshape(x, shape):
    x = as_tensor(x)
    out = x.data.reshape(shape)
    return record("reshape", (x,), out, lambda g: (g.reshape(x.shape),))


def transpose(x, axes):
    x = as_tensor(x)
    axes = tuple(axes)
    inverse = tuple(np.argsort(axes))
    out = np.ascontiguousarray(x.data.transpose(axes))
    return record("transpose", (x,), out,
                  lambda g: (np.ascontiguousarray(g.transpose(inverse)),))


def take_rows(x, rows):
    """Select rows of a 2-D tensor (row indices must be distinct)."""
    x = as_tensor(x)
    rows = np.asarray(rows, dtype=np.intp)

    def backward_fn(g):
        gx = np.zeros_like(x.data)
        gx[rows] = g
        return (gx,)

    return record("take_rows", (x,), x.data[rows], backward_fn)


def log_softmax_rows(z):
    shifted = z - z.max(axis=-1, keepdims=True)
    return shifted - np.log(np.exp(shifted).sum(axis=-1, keepdims=True))


def cross_entropy(logits, targets):
    """Mean over rows of -log softmax(logits)[target]."""
    logits = as_tensor(logits)
    targets = np.asarray(targets, dtype=np.intp)
    if logits.ndim != 2 or targets.shape != (logits.shape[0],):
        raise DimensionError("cross_entropy needs M×K logits and M targets", axis=0,
                             expected=logits.shape[:1], got=targets.shape)
    m = logits.shape[0]
    logp = log_softmax_rows(logits.data)
    rows = np.arange(m)
    out = np.asarray(-logp[rows, targets].mean() if m else 0.0, dtype=logits.dtype)

    def backward_fn(g):
        p = np.exp(logp)
        p[rows, targets] -= 1
        return (p * (g / max(m, 1)),)

    return record("cross_entropy", (logits,), out, backward_fn)


def smooth_l1_elementwise(d, beta=1.0):
    """Per-element smooth-L1 of a residual ``d``: 0.5 d²/β inside |d|<β, |d|-0.5β outside."""
    ad = np.abs(d)
    return np.where(ad < beta, 0.5 * d * d / beta, ad - 0.5 * beta)


def smooth_l1(pred, target, beta=1.0):
    """Mean over rows of the coordinate-summed smooth-L1 between ``pred`` and constant ``target``."""
    pred = as_tensor(pred)
    target = np.asarray(target, dtype=pred.dtype)
    _check_same_shape(pred, Tensor(target, dtype=target.dtype), "smooth_l1")
    m = pred.shape[0] if pred.ndim else 1
    d = pred.data - target
    inside = np.abs(d) < beta
    total = smooth_l1_elementwise(d, beta).sum() / max(m, 1)
    out = np.asarray(total, dtype=pred.dtype)

    def backward_fn(g):
        slope = np.where(inside, d / beta, np.sign(d))
        return ((g / max(m, 1)) * slope,)

    return record("smooth_l1", (pred,), out, backward_fn, branch=inside)

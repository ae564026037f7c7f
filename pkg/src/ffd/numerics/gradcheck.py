"""Central-difference gradient checking in float64."""

from dataclasses import dataclass

import numpy as np

from ..errors import NumericalError
from .tensor import Tape, Tensor, backward


@dataclass
class GradCheckReport:
    max_rel_error: float
    checked: int
    excluded: int
    worst: tuple = ()  # (input index, flat coordinate)


def _branch_signature(out):
    return [node.branch.copy() for node in Tape.from_output(out).nodes if node.branch is not None]


def _same_branches(sig_a, sig_b):
    return len(sig_a) == len(sig_b) and all(
        a.shape == b.shape and np.array_equal(a, b) for a, b in zip(sig_a, sig_b))


def check_gradients(fn, inputs, step=1e-3, max_coords=None, seed=0, dtype=np.float64):
    """Compare backprop against central differences for every input coordinate.

    ``fn(*tensors)`` must build a scalar from the given tensors and be pure.
    Coordinates where the ±step perturbation changes the branch taken by any
    ReLU or smooth-L1 element are excluded (kink crossings). ``max_coords``
    caps the coordinates checked per input, sampled with ``seed``. ``dtype``
    other than float64 is only useful to show how much precision matters.
    """
    if step <= 0:
        raise ValueError("step must be positive")
    xs = [Tensor(np.array(t.data if isinstance(t, Tensor) else t, dtype=dtype),
                 requires_grad=True, dtype=dtype) for t in inputs]

    def evaluate():
        out = fn(*xs)
        if out.size != 1:
            raise NumericalError("gradient check needs a scalar-valued function")
        return out

    base = evaluate()
    again = evaluate()
    if base.data.tobytes() != again.data.tobytes():
        raise NumericalError("function is not deterministic; gradient check needs a pure fn")
    if base.node is None:
        raise NumericalError("function output does not depend on the inputs")
    base_sig = _branch_signature(base)
    for x in xs:
        x.grad = None
    backward(base)
    analytic = [np.zeros_like(x.data) if x.grad is None else x.grad.copy() for x in xs]

    rng = np.random.default_rng(seed)
    worst, worst_at, checked, excluded = 0.0, (), 0, 0
    for i, x in enumerate(xs):
        flat = x.data.reshape(-1)
        coords = np.arange(flat.size)
        if max_coords is not None and flat.size > max_coords:
            coords = np.sort(rng.choice(flat.size, size=max_coords, replace=False))
        for c in coords:
            orig = flat[c]
            flat[c] = orig + step
            plus = evaluate()
            sig_plus = _branch_signature(plus)
            flat[c] = orig - step
            minus = evaluate()
            sig_minus = _branch_signature(minus)
            flat[c] = orig
            if not (_same_branches(base_sig, sig_plus) and _same_branches(base_sig, sig_minus)):
                excluded += 1
                continue
            numeric = (plus.item() - minus.item()) / (2 * step)
            a = float(analytic[i].reshape(-1)[c])
            err = abs(a - numeric) / max(1.0, abs(a), abs(numeric))
            checked += 1
            if err > worst:
                worst, worst_at = err, (i, int(c))
    return GradCheckReport(worst, checked, excluded, worst_at)


def gradient_check(fn, inputs, step=1e-3, max_coords=None, seed=0, dtype=np.float64):
    """Max relative error |analytic - numeric| / max(1, |analytic|, |numeric|)."""
    return check_gradients(fn, inputs, step, max_coords, seed, dtype).max_rel_error

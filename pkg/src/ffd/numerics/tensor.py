"""Dense tensor with reverse-mode differentiation.

Every primitive that touches a tensor with ``requires_grad`` attaches a
:class:`Node` to its output. :func:`backward` linearises the reachable nodes
into a :class:`Tape` (inputs before outputs) and replays it in reverse.
"""

from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

from ..errors import DimensionError

DEFAULT_DTYPE = np.float32


class Tensor:
    __slots__ = ("data", "requires_grad", "grad", "node")

    def __init__(self, data, requires_grad=False, dtype=None):
        arr = np.asarray(data, dtype=dtype)
        if dtype is None and arr.dtype not in (np.float32, np.float64):
            arr = arr.astype(DEFAULT_DTYPE)
        self.data = arr
        self.requires_grad = bool(requires_grad)
        self.grad: Optional[np.ndarray] = None
        self.node: Optional["Node"] = None

    @property
    def shape(self):
        return self.data.shape

    @property
    def ndim(self):
        return self.data.ndim

    @property
    def dtype(self):
        return self.data.dtype

    @property
    def size(self):
        return self.data.size

    def numpy(self):
        return self.data

    def item(self):
        return float(self.data.reshape(-1)[0]) if self.data.size == 1 else float("nan")

    def detach(self):
        return Tensor(self.data, dtype=self.data.dtype)

    def astype(self, dtype):
        return Tensor(self.data.astype(dtype), requires_grad=self.requires_grad, dtype=dtype)

    def zero_grad(self):
        self.grad = None

    def __repr__(self):
        flag = ", requires_grad=True" if self.requires_grad else ""
        return f"Tensor(shape={self.shape}, dtype={self.dtype}{flag})"


@dataclass(eq=False)
class Node:
    """One recorded primitive application."""

    op: str
    inputs: Sequence[Tensor]
    output: Tensor
    backward: Callable[[np.ndarray], Sequence[Optional[np.ndarray]]]
    # boolean map of which branch each element took (ReLU, smooth-L1);
    # the gradient checker uses it to find kink crossings
    branch: Optional[np.ndarray] = None


def as_tensor(x):
    return x if isinstance(x, Tensor) else Tensor(x)


def record(op, inputs, out_data, backward_fn, branch=None):
    """Wrap ``out_data`` in a Tensor and attach a node if any input needs gradients."""
    out = Tensor(out_data, dtype=out_data.dtype)
    if any(t.requires_grad for t in inputs):
        out.requires_grad = True
        out.node = Node(op, tuple(inputs), out, backward_fn, branch)
    return out


@dataclass
class Tape:
    nodes: list = field(default_factory=list)

    @classmethod
    def from_output(cls, out: Tensor) -> "Tape":
        """Topologically ordered nodes reachable from ``out`` (iterative DFS)."""
        order, seen = [], set()
        if out.node is None:
            return cls(order)
        stack = [(out.node, False)]
        while stack:
            node, expanded = stack.pop()
            if expanded:
                order.append(node)
                continue
            if id(node) in seen:
                continue
            seen.add(id(node))
            stack.append((node, True))
            for t in reversed(node.inputs):
                if t.node is not None and id(t.node) not in seen:
                    stack.append((t.node, False))
        return cls(order)

    def replay(self, seed_grad):
        grads = {id(self.nodes[-1].output): seed_grad}
        for node in reversed(self.nodes):
            g_out = grads.pop(id(node.output), None)
            if g_out is None:
                continue
            out = node.output
            out.grad = g_out if out.grad is None else out.grad + g_out
            in_grads = node.backward(g_out)
            for t, g in zip(node.inputs, in_grads):
                if g is None or not t.requires_grad:
                    continue
                if g.shape != t.shape:
                    raise DimensionError(f"backward rule of {node.op} returned a bad gradient",
                                         expected=t.shape, got=g.shape)
                if t.node is None:
                    t.grad = g.astype(t.dtype, copy=True) if t.grad is None else t.grad + g
                else:
                    key = id(t)
                    grads[key] = g if key not in grads else grads[key] + g


def backward(loss: Tensor):
    """Populate ``.grad`` of every tensor needing gradients that ``loss`` depends on."""
    if loss.size != 1:
        raise DimensionError("backward needs a scalar loss", expected=1, got=loss.shape)
    if loss.node is None:
        raise ValueError("loss was not recorded on a tape (no input requires gradients)")
    tape = Tape.from_output(loss)
    tape.replay(np.ones_like(loss.data))
    return tape

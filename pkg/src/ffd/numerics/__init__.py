"""Minimal tensor engine: the primitives the detector needs and a gradient checker."""

from .gradcheck import GradCheckReport, check_gradients, gradient_check
from .ops import (activation, add, batch_norm, broadcast_mul, conv2d, cross_entropy,
                  global_avg_pool, log_softmax_rows, mul, relu, reshape, scale, sigmoid,
                  smooth_l1, smooth_l1_elementwise, softmax_channels, sum_all, take_rows,
                  transpose)
from .tensor import Node, Tape, Tensor, backward

__all__ = [
    "GradCheckReport", "Node", "Tape", "Tensor", "activation", "add", "backward", "batch_norm",
    "broadcast_mul", "check_gradients", "conv2d", "cross_entropy", "global_avg_pool",
    "gradient_check", "log_softmax_rows", "mul", "relu", "reshape", "scale", "sigmoid",
    "smooth_l1", "smooth_l1_elementwise", "softmax_channels", "sum_all", "take_rows",
    "transpose",
]

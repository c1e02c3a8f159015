"""Minimal reverse-mode autodiff over float64 numpy arrays."""
from .gradcheck import GradCheckReport, grad_check
from .ops import (
    add, concat, exp, hadamard, log, matmul, max_axis, mean_axis, mul, relu, reshape,
    row_softmax, scalar_mul, sigmoid, softmax_numpy, stack, sub, sum_axis, take, tanh,
    transpose,
)
from .snapshot import load_snapshots, save_snapshots
from .tensor import Gradients, Node, Tensor, as_tensor, backward

__all__ = [
    "GradCheckReport", "Gradients", "Node", "Tensor", "add", "as_tensor", "backward",
    "concat", "exp", "grad_check", "hadamard", "load_snapshots", "log", "matmul",
    "max_axis", "mean_axis", "mul", "relu", "reshape", "row_softmax", "save_snapshots",
    "scalar_mul", "sigmoid", "softmax_numpy", "stack", "sub", "sum_axis", "take", "tanh",
    "transpose",
]

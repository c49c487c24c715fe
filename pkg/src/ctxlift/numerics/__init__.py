"""Minimal float64 tensor engine: primitives, tape autodiff, bilinear sampling."""
from . import ops
from .gradcheck import GradCheckReport, finite_diff_check, relative_error
from .ops import (
    add, clip, concat, div, exp, gelu, getitem, layer_norm, linear, log, log_softmax,
    matmul, mean, mul, neg, norm, reshape, softmax, square, stack, sub, swapaxes,
    transpose,
)
from .ops import sum as tsum
from .sampling import ArrayGrid, GridSource, bilinear_sample, grid_coords
from .tensor import (
    GradientTape, NonFiniteError, ShapeError, Tensor, active_tape, as_tensor, backward,
    finite_checks, no_grad,
)


def mlp_block(x, w1, b1, w2, b2):
    """linear -> GELU -> linear; the caller adds the residual."""
    return linear(gelu(linear(x, w1, b1)), w2, b2)


__all__ = [
    "ArrayGrid", "GradCheckReport", "GradientTape", "GridSource", "NonFiniteError",
    "ShapeError", "Tensor", "active_tape", "add", "as_tensor", "backward",
    "bilinear_sample", "clip", "concat", "div", "exp", "finite_checks",
    "finite_diff_check", "gelu", "getitem", "grid_coords", "layer_norm", "linear", "log",
    "log_softmax", "matmul", "mean", "mlp_block", "mul", "neg", "no_grad", "norm", "ops",
    "relative_error", "reshape", "softmax", "square", "stack", "sub", "swapaxes",
    "transpose", "tsum",
]

"""Differentiable primitives over :class:`Tensor`.

Every function here returns a new tensor and, when a tape is active, records a
vector-Jacobian product closure for it. Broadcasting follows numpy rules; the
gradient of a broadcast operand is summed back to its own shape.
"""
import numpy as np

from . import _fused
from .tensor import ShapeError, as_tensor, make_result


def _unbroadcast(grad, shape):
    if grad.shape == shape:
        return grad
    extra = grad.ndim - len(shape)
    if extra > 0:
        grad = grad.sum(axis=tuple(range(extra)))
    axes = tuple(i for i, n in enumerate(shape) if n == 1 and grad.shape[i] != 1)
    if axes:
        grad = grad.sum(axis=axes, keepdims=True)
    return grad


def _broadcast_shape(a, b, what):
    try:
        return np.broadcast_shapes(a.shape, b.shape)
    except ValueError as exc:
        raise ShapeError(f"{what}: cannot broadcast {a.shape} with {b.shape}") from exc


def add(a, b):
    a, b = as_tensor(a), as_tensor(b)
    _broadcast_shape(a, b, "add")

    def vjp(g, needs):
        return (
            _unbroadcast(g, a.shape) if needs[0] else None,
            _unbroadcast(g, b.shape) if needs[1] else None,
        )

    return make_result(a.data + b.data, (a, b), vjp, "add")


def sub(a, b):
    a, b = as_tensor(a), as_tensor(b)
    _broadcast_shape(a, b, "sub")

    def vjp(g, needs):
        return (
            _unbroadcast(g, a.shape) if needs[0] else None,
            _unbroadcast(-g, b.shape) if needs[1] else None,
        )

    return make_result(a.data - b.data, (a, b), vjp, "sub")


def mul(a, b):
    a, b = as_tensor(a), as_tensor(b)
    _broadcast_shape(a, b, "mul")

    def vjp(g, needs):
        return (
            _unbroadcast(g * b.data, a.shape) if needs[0] else None,
            _unbroadcast(g * a.data, b.shape) if needs[1] else None,
        )

    return make_result(a.data * b.data, (a, b), vjp, "mul")


def div(a, b):
    a, b = as_tensor(a), as_tensor(b)
    _broadcast_shape(a, b, "div")
    out = a.data / b.data

    def vjp(g, needs):
        return (
            _unbroadcast(g / b.data, a.shape) if needs[0] else None,
            _unbroadcast(-g * out / b.data, b.shape) if needs[1] else None,
        )

    return make_result(out, (a, b), vjp, "div")


def neg(a):
    return make_result(-a.data, (a,), lambda g, needs: (-g,), "neg")


def exp(a):
    out = np.exp(a.data)
    return make_result(out, (a,), lambda g, needs: (g * out,), "exp")


def log(a):
    return make_result(np.log(a.data), (a,), lambda g, needs: (g / a.data,), "log")


def square(a):
    return make_result(a.data * a.data, (a,), lambda g, needs: (2.0 * g * a.data,), "square")


def matmul(a, b):
    """Matrix product over the last two axes (leading axes broadcast)."""
    a, b = as_tensor(a), as_tensor(b)
    if a.ndim < 2 or b.ndim < 2 or a.shape[-1] != b.shape[-2]:
        raise ShapeError(f"matmul: incompatible shapes {a.shape} and {b.shape}")

    def vjp(g, needs):
        ga = gb = None
        if needs[0]:
            ga = _unbroadcast(g @ np.swapaxes(b.data, -1, -2), a.shape)
        if needs[1]:
            gb = _unbroadcast(np.swapaxes(a.data, -1, -2) @ g, b.shape)
        return ga, gb

    return make_result(a.data @ b.data, (a, b), vjp, "matmul")


def linear(x, weight, bias=None):
    """``x @ weight + bias`` over the last axis, folded into one GEMM."""
    lead = x.shape[:-1]
    din, dout = weight.shape
    if x.shape[-1] != din:
        raise ShapeError(f"linear: input width {x.shape[-1]} != weight rows {din}")
    x2 = x.data.reshape(-1, din)
    out = x2 @ weight.data
    if bias is not None:
        out += bias.data
    out = out.reshape(lead + (dout,))
    parents = (x, weight) if bias is None else (x, weight, bias)

    def vjp(g, needs):
        g2 = g.reshape(-1, dout)
        gx = (g2 @ weight.data.T).reshape(x.shape) if needs[0] else None
        gw = x2.T @ g2 if needs[1] else None
        if bias is None:
            return gx, gw
        gb = _fused.column_sums(np.ascontiguousarray(g2)) if needs[2] else None
        return gx, gw, gb

    return make_result(out, parents, vjp, "linear")


def _norm_axis(axis, ndim):
    if axis is None:
        return tuple(range(ndim))
    if isinstance(axis, int):
        axis = (axis,)
    return tuple(a % ndim for a in axis)


def sum(a, axis=None, keepdims=False):  # noqa: A001 - mirrors numpy
    axes = _norm_axis(axis, a.ndim)
    out = a.data.sum(axis=axes, keepdims=keepdims)

    def vjp(g, needs):
        if not keepdims:
            g = np.expand_dims(g, axes)
        return (np.broadcast_to(g, a.shape),)

    return make_result(np.asarray(out), (a,), vjp, "sum")


def mean(a, axis=None, keepdims=False):
    axes = _norm_axis(axis, a.ndim)
    count = int(np.prod([a.shape[i] for i in axes]))
    return mul(sum(a, axis=axes, keepdims=keepdims), 1.0 / count)


def reshape(a, shape):
    out = a.data.reshape(shape)
    return make_result(out, (a,), lambda g, needs: (g.reshape(a.shape),), "reshape")


def transpose(a, axes=None):
    if axes is None:
        axes = tuple(reversed(range(a.ndim)))
    inverse = np.argsort(axes)
    out = np.transpose(a.data, axes)
    return make_result(out, (a,), lambda g, needs: (np.transpose(g, inverse),), "transpose")


def swapaxes(a, i, j):
    axes = list(range(a.ndim))
    axes[i], axes[j] = axes[j], axes[i]
    return transpose(a, tuple(axes))


def getitem(a, index):
    out = a.data[index]
    basic = not _is_advanced(index)

    def vjp(g, needs):
        full = np.zeros_like(a.data)
        if basic:
            full[index] = g
        else:
            np.add.at(full, index, g)
        return (full,)

    return make_result(np.array(out, dtype=np.float64), (a,), vjp, "getitem")


def _is_advanced(index):
    items = index if isinstance(index, tuple) else (index,)
    return any(isinstance(i, (list, np.ndarray)) for i in items)


def concat(tensors, axis=0):
    tensors = [as_tensor(t) for t in tensors]
    out = np.concatenate([t.data for t in tensors], axis=axis)
    bounds = np.cumsum([t.shape[axis] for t in tensors])[:-1]

    def vjp(g, needs):
        return tuple(np.split(g, bounds, axis=axis))

    return make_result(out, tuple(tensors), vjp, "concat")


def stack(tensors, axis=0):
    tensors = [as_tensor(t) for t in tensors]
    out = np.stack([t.data for t in tensors], axis=axis)
    n = len(tensors)

    def vjp(g, needs):
        parts = np.split(g, n, axis=axis)
        return tuple(np.squeeze(p, axis=axis) for p in parts)

    return make_result(out, tuple(tensors), vjp, "stack")


def softmax(x, axis=-1):
    """Numerically stable softmax (max-subtracted)."""
    z = x.data - x.data.max(axis=axis, keepdims=True)
    e = np.exp(z)
    out = e / e.sum(axis=axis, keepdims=True)

    def vjp(g, needs):
        return (out * (g - (g * out).sum(axis=axis, keepdims=True)),)

    return make_result(out, (x,), vjp, "softmax")


def log_softmax(x, axis=-1):
    z = x.data - x.data.max(axis=axis, keepdims=True)
    lse = np.log(np.exp(z).sum(axis=axis, keepdims=True))
    out = z - lse

    def vjp(g, needs):
        return (g - np.exp(out) * g.sum(axis=axis, keepdims=True),)

    return make_result(out, (x,), vjp, "log_softmax")


def layer_norm(x, gain, bias, eps=1e-5):
    """Standardize the last axis (biased variance + ``eps``), then scale and shift."""
    n = x.shape[-1]
    if n < 2:
        raise ShapeError("layer_norm needs at least 2 channels")
    x2 = np.ascontiguousarray(x.data.reshape(-1, n))
    out, xhat, inv = _fused.layer_norm_fwd(x2, gain.data, bias.data, eps)

    def vjp(g, needs):
        g2 = np.ascontiguousarray(g.reshape(-1, n))
        gx, gg, gb = _fused.layer_norm_bwd(g2, xhat, inv, gain.data, needs[0])
        return (gx.reshape(x.shape) if needs[0] else None,
                gg if needs[1] else None, gb if needs[2] else None)

    return make_result(out.reshape(x.shape), (x, gain, bias), vjp, "layer_norm")


def gelu(x):
    """Exact (erf-based) GELU."""
    xd = np.ascontiguousarray(x.data)
    out = _fused.gelu_fwd(xd)

    def vjp(g, needs):
        return (_fused.gelu_bwd(xd, np.ascontiguousarray(g)),)

    return make_result(out, (x,), vjp, "gelu")


def norm(x, axis=-1):
    """Euclidean norm along ``axis``; the gradient at the origin is taken as 0."""
    n = np.sqrt((x.data * x.data).sum(axis=axis))

    def vjp(g, needs):
        safe = np.where(n > 0, n, 1.0)
        scale = np.where(n > 0, g / safe, 0.0)
        return (x.data * np.expand_dims(scale, axis),)

    return make_result(n, (x,), vjp, "norm")


def clip(x, lo, hi):
    out = np.clip(x.data, lo, hi)
    inside = (x.data >= lo) & (x.data <= hi)
    return make_result(out, (x,), lambda g, needs: (g * inside,), "clip")

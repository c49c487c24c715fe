"""Dense float64 tensors with tape-based reverse-mode differentiation."""
from __future__ import annotations

import threading
from contextlib import contextmanager

import numpy as np


class NonFiniteError(FloatingPointError):
    """An operation produced NaN or Inf."""


class ShapeError(ValueError):
    """Operand extents are incompatible."""


_state = threading.local()


def _tape_stack():
    stack = getattr(_state, "tapes", None)
    if stack is None:
        stack = _state.tapes = []
    return stack


def checks_enabled():
    return getattr(_state, "check_finite", True)


@contextmanager
def finite_checks(enabled):
    """Toggle per-operation NaN/Inf checks for the current thread.

    The trainer switches them off inside a step and validates the loss and
    gradients instead, which catches the same failures at a fraction of the cost.
    """
    prev = checks_enabled()
    _state.check_finite = enabled
    try:
        yield
    finally:
        _state.check_finite = prev


def _check(arr, what):
    if checks_enabled() and not np.all(np.isfinite(arr)):
        raise NonFiniteError(f"non-finite values produced by {what}")


class Tensor:
    """Immutable array value, optionally tracked for gradients.

    ``data`` is a float64 ndarray. Leaves created with ``requires_grad=True``
    receive ``.grad`` (same shape as ``data``) after :func:`backward`.
    """

    __slots__ = ("data", "requires_grad", "grad", "_parents", "_vjp", "name")
    __array_priority__ = 100

    def __init__(self, data, requires_grad=False, name=None):
        arr = np.asarray(data, dtype=np.float64)
        if arr.ndim and 0 in arr.shape:
            raise ShapeError(f"tensor extents must be positive, got {arr.shape}")
        _check(arr, "tensor construction")
        self.data = arr
        self.requires_grad = bool(requires_grad)
        self.grad = None
        self._parents = ()
        self._vjp = None
        self.name = name

    @property
    def shape(self):
        return self.data.shape

    @property
    def ndim(self):
        return self.data.ndim

    @property
    def size(self):
        return self.data.size

    @property
    def is_leaf(self):
        return self._vjp is None

    def numpy(self):
        return self.data

    def item(self):
        return float(self.data)

    def zero_grad(self):
        self.grad = None

    def __repr__(self):
        tag = f" name={self.name!r}" if self.name else ""
        return f"Tensor(shape={self.shape}{tag}, requires_grad={self.requires_grad})"

    # Operator sugar; implementations live in ops.
    def __add__(self, other):
        from . import ops

        return ops.add(self, other)

    __radd__ = __add__

    def __sub__(self, other):
        from . import ops

        return ops.sub(self, other)

    def __rsub__(self, other):
        from . import ops

        return ops.sub(other, self)

    def __mul__(self, other):
        from . import ops

        return ops.mul(self, other)

    __rmul__ = __mul__

    def __truediv__(self, other):
        from . import ops

        return ops.div(self, other)

    def __neg__(self):
        from . import ops

        return ops.neg(self)

    def __matmul__(self, other):
        from . import ops

        return ops.matmul(self, other)

    def __getitem__(self, index):
        from . import ops

        return ops.getitem(self, index)

    def reshape(self, *shape):
        from . import ops

        if len(shape) == 1 and isinstance(shape[0], (tuple, list)):
            shape = tuple(shape[0])
        return ops.reshape(self, shape)

    def transpose(self, *axes):
        from . import ops

        if len(axes) == 1 and isinstance(axes[0], (tuple, list)):
            axes = tuple(axes[0])
        return ops.transpose(self, axes or None)

    def sum(self, axis=None, keepdims=False):
        from . import ops

        return ops.sum(self, axis=axis, keepdims=keepdims)

    def mean(self, axis=None, keepdims=False):
        from . import ops

        return ops.mean(self, axis=axis, keepdims=keepdims)


def as_tensor(x):
    return x if isinstance(x, Tensor) else Tensor(x)


class GradientTape:
    """Ordered record of executed primitives.

    Operations record themselves onto the innermost active tape whenever at
    least one input requires gradients::

        with GradientTape() as tape:
            loss = f(params)
        tape.backward(loss)
    """

    def __init__(self):
        self.records = []

    def __enter__(self):
        _tape_stack().append(self)
        return self

    def __exit__(self, *exc):
        stack = _tape_stack()
        if stack and stack[-1] is self:
            stack.pop()
        return False

    def __len__(self):
        return len(self.records)

    def reset(self):
        self.records = []

    def backward(self, output):
        backward(output, self)


def active_tape():
    stack = _tape_stack()
    return stack[-1] if stack else None


@contextmanager
def no_grad():
    """Suspend recording (evaluation mode)."""
    stack = _tape_stack()
    saved = stack[:]
    stack.clear()
    try:
        yield
    finally:
        stack[:] = saved


def make_result(data, parents, vjp, what):
    """Wrap an op output, recording it on the active tape when needed.

    ``vjp(grad, needs)`` returns one gradient (or None) per parent; ``needs``
    tells it which parents actually want one.
    """
    _check(data, what)
    out = Tensor.__new__(Tensor)
    out.data = data
    out.grad = None
    out.name = None
    out._parents = ()
    out._vjp = None
    tape = active_tape()
    track = tape is not None and any(p.requires_grad for p in parents)
    out.requires_grad = track
    if track:
        out._parents = tuple(parents)
        out._vjp = vjp
        tape.records.append(out)
    return out


def backward(output, tape=None):
    """Accumulate d(output)/d(leaf) into ``leaf.grad`` for every tracked leaf.

    The tape is consumed: its records are cleared afterwards.
    """
    if tape is None:
        tape = active_tape()
    if tape is None:
        raise RuntimeError("backward needs the tape that recorded the computation")
    if output.data.size != 1:
        raise ShapeError(f"backward requires a scalar output, got shape {output.shape}")
    if not output.requires_grad:
        tape.reset()
        return
    grads = {id(output): np.ones_like(output.data)}
    for node in reversed(tape.records):
        g = grads.pop(id(node), None)
        if g is None:
            continue
        needs = tuple(p.requires_grad for p in node._parents)
        parent_grads = node._vjp(g, needs)
        for parent, pg, need in zip(node._parents, parent_grads, needs):
            if not need or pg is None:
                continue
            if parent._vjp is None:
                if parent.grad is None:
                    parent.grad = np.array(pg, dtype=np.float64, copy=True)
                else:
                    parent.grad = parent.grad + pg
            else:
                key = id(parent)
                prev = grads.get(key)
                grads[key] = pg if prev is None else prev + pg
    tape.reset()

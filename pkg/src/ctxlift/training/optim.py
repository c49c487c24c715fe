"""AdamW with parameter groups and an exponential learning-rate schedule."""
import math

import numpy as np

from ..model.params import is_embedding, is_offset_param

BASE_LR = 6.4e-3
LR_DECAY = 0.99


class NonFiniteGradientError(FloatingPointError):
    """A gradient contained NaN or Inf; the optimizer step was not applied."""


def lr_schedule(epoch, base_lr=BASE_LR, decay=LR_DECAY):
    """Learning rate for ``epoch`` (0-based): ``base_lr * decay**epoch``."""
    if epoch < 0:
        raise ValueError("epoch must be >= 0")
    return base_lr * decay ** epoch


def param_groups(params, offset_lr_scale=0.1, weight_decay=0.01):
    """Per-parameter ``(lr multiplier, weight decay)``.

    Offset-generating layers train at ``offset_lr_scale`` times the base rate;
    positional embeddings are exempt from weight decay.
    """
    groups = {}
    for name in params:
        scale = offset_lr_scale if is_offset_param(name) else 1.0
        decay = 0.0 if is_embedding(name) else weight_decay
        groups[name] = (scale, decay)
    return groups


def clip_grad_norm(grads, max_norm):
    """Rescale ``grads`` (dict of arrays) in place to global norm <= max_norm.

    Returns the norm before clipping.
    """
    total = math.sqrt(sum(float(np.vdot(g, g)) for g in grads.values()))
    if max_norm is not None and total > max_norm:
        scale = max_norm / (total + 1e-12)
        for g in grads.values():
            g *= scale
    return total


class AdamW:
    """Decoupled-weight-decay Adam over a :class:`ParameterSet`.

    Parameters
    ----------
    params : ParameterSet
    lr : float
        Base learning rate; group multipliers scale it per parameter.
    betas : tuple of float
    eps : float
    weight_decay : float
    offset_lr_scale : float
        Learning-rate multiplier of the offset-generating layers.
    """

    def __init__(self, params, lr=BASE_LR, betas=(0.9, 0.999), eps=1e-8, weight_decay=0.01,
                 offset_lr_scale=0.1):
        self.params = params
        self.lr = lr
        self.betas = betas
        self.eps = eps
        self.weight_decay = weight_decay
        self.groups = param_groups(params, offset_lr_scale, weight_decay)
        self.step_count = 0
        self.m = {k: np.zeros_like(t.data) for k, t in params.items()}
        self.v = {k: np.zeros_like(t.data) for k, t in params.items()}

    def step(self, grads=None):
        """Apply one update from ``grads`` (default: each parameter's ``.grad``).

        Missing gradients count as zero. Raises
        :class:`NonFiniteGradientError` before touching any state if a
        gradient is not finite.
        """
        if grads is None:
            grads = {k: t.grad for k, t in self.params.items() if t.grad is not None}
        for name, g in grads.items():
            if not np.all(np.isfinite(g)):
                raise NonFiniteGradientError(f"non-finite gradient for {name}")
        self.step_count += 1
        b1, b2 = self.betas
        c1 = 1.0 - b1 ** self.step_count
        c2 = 1.0 - b2 ** self.step_count
        for name, t in self.params.items():
            g = grads.get(name)
            if g is None:
                g = np.zeros_like(t.data)
            scale, decay = self.groups[name]
            lr = self.lr * scale
            m, v = self.m[name], self.v[name]
            m *= b1
            m += (1.0 - b1) * g
            v *= b2
            v += (1.0 - b2) * g * g
            if decay:
                t.data *= 1.0 - lr * decay
            t.data -= lr * (m / c1) / (np.sqrt(v / c2) + self.eps)

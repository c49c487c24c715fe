"""Central-difference verification of tape gradients."""
from dataclasses import dataclass, field

import numpy as np

from .tensor import GradientTape, backward


@dataclass
class GradCheckReport:
    max_rel_error: float
    checked: int
    worst: tuple = ()
    details: list = field(default_factory=list)
    tol: float = 1e-4

    def passed(self, tol=None):
        return self.max_rel_error < (self.tol if tol is None else tol)


def relative_error(analytic, numeric, floor=1e-6):
    """``|a - n| / max(|a|, |n|, floor)``; the floor keeps exactly-zero
    gradients (whose central difference is pure roundoff) from dividing by 0."""
    return abs(analytic - numeric) / max(abs(analytic), abs(numeric), floor)


def finite_diff_check(f, params, h=1e-5, tol=1e-4, n_samples=10, rng=None, floor=1e-6):
    """Compare tape gradients of scalar ``f(params)`` to central differences.

    Parameters
    ----------
    f : callable
        Takes the list of parameter tensors and returns a scalar Tensor.
    params : list of Tensor
        Leaves with ``requires_grad=True``; perturbed in place and restored.
    h : float
        Step size, in [1e-7, 1e-3].
    n_samples : int
        Coordinates checked per parameter tensor (all of them if smaller).
    floor : float
        Denominator floor of the relative error (see :func:`relative_error`).

    Returns
    -------
    GradCheckReport with the largest relative error seen.
    """
    if not 1e-7 <= h <= 1e-3:
        raise ValueError(f"h must lie in [1e-7, 1e-3], got {h}")
    rng = np.random.default_rng(0) if rng is None else rng
    for p in params:
        p.grad = None
    with GradientTape() as tape:
        out = f(params)
    backward(out, tape)
    analytic = [np.zeros_like(p.data) if p.grad is None else p.grad for p in params]

    worst, worst_at, details = 0.0, (), []
    for pi, p in enumerate(params):
        flat = p.data.reshape(-1)
        count = min(n_samples, flat.size)
        picks = rng.choice(flat.size, size=count, replace=False)
        for idx in picks:
            orig = flat[idx]
            flat[idx] = orig + h
            up = float(f(params).data)
            flat[idx] = orig - h
            down = float(f(params).data)
            flat[idx] = orig
            numeric = (up - down) / (2.0 * h)
            a = float(analytic[pi].reshape(-1)[idx])
            err = relative_error(a, numeric, floor)
            details.append((pi, int(idx), a, numeric, err))
            if err > worst:
                worst, worst_at = err, (pi, int(idx))
    return GradCheckReport(worst, len(details), worst_at, details, tol)

"""Single-pass kernels for row-wise primitives (layer norm, GELU, column sums)."""
import math

import numpy as np
from numba import njit

_INV_SQRT2 = 1.0 / math.sqrt(2.0)
_INV_SQRT_2PI = 1.0 / math.sqrt(2.0 * math.pi)


@njit(cache=True)
def layer_norm_fwd(x, gain, bias, eps):
    rows, n = x.shape
    out = np.empty_like(x)
    xhat = np.empty_like(x)
    inv = np.empty(rows)
    for r in range(rows):
        mu = 0.0
        for c in range(n):
            mu += x[r, c]
        mu /= n
        var = 0.0
        for c in range(n):
            d = x[r, c] - mu
            var += d * d
        var /= n
        s = 1.0 / math.sqrt(var + eps)
        inv[r] = s
        for c in range(n):
            h = (x[r, c] - mu) * s
            xhat[r, c] = h
            out[r, c] = h * gain[c] + bias[c]
    return out, xhat, inv


@njit(cache=True)
def layer_norm_bwd(g, xhat, inv, gain, want_x):
    rows, n = g.shape
    gx = np.empty_like(g) if want_x else np.empty((0, n))
    gg = np.zeros(n)
    gb = np.zeros(n)
    for r in range(rows):
        m1 = 0.0
        m2 = 0.0
        for c in range(n):
            gh = g[r, c] * gain[c]
            m1 += gh
            m2 += gh * xhat[r, c]
            gg[c] += g[r, c] * xhat[r, c]
            gb[c] += g[r, c]
        if want_x:
            m1 /= n
            m2 /= n
            for c in range(n):
                gx[r, c] = inv[r] * (g[r, c] * gain[c] - m1 - xhat[r, c] * m2)
    return gx, gg, gb


@njit(cache=True)
def gelu_fwd(x):
    flat = x.ravel()
    out = np.empty_like(flat)
    for i in range(flat.size):
        v = flat[i]
        out[i] = v * (0.5 * (1.0 + math.erf(v * _INV_SQRT2)))
    return out.reshape(x.shape)


@njit(cache=True)
def gelu_bwd(x, g):
    fx = x.ravel()
    fg = g.ravel()
    out = np.empty_like(fx)
    for i in range(fx.size):
        v = fx[i]
        cdf = 0.5 * (1.0 + math.erf(v * _INV_SQRT2))
        out[i] = fg[i] * (cdf + v * _INV_SQRT_2PI * math.exp(-0.5 * v * v))
    return out.reshape(x.shape)


@njit(cache=True)
def column_sums(a):
    rows, n = a.shape
    out = np.zeros(n)
    for r in range(rows):
        for c in range(n):
            out[c] += a[r, c]
    return out

"""Fused bilinear sampling of procedurally rendered pyramid levels.

Computes the same arithmetic, in the same order, as
``GridSource.interpolate`` over ``RenderedGrid.gather`` values, without
materializing the four (N, C) corner arrays.
"""
import math

import numpy as np
from numba import njit


@njit(cache=True)
def _corner(coord, n):
    x = coord * (n - 1)
    inside = 1.0 if (x >= 0.0 and x <= n - 1) else 0.0
    x = min(max(x, 0.0), n - 1.0)
    x0 = min(math.floor(x), max(n - 2, 0))
    i0 = int(x0)
    return i0, min(i0 + 1, n - 1), x - x0, inside


@njit(cache=True)
def rendered_interpolate(points, bidx, gx, gy, depths, keys, noise, height, width, want_grad):
    n_pts = points.shape[0]
    n_joints = gx.shape[2]
    n_noise = noise.shape[3]
    n_ch = 2 * n_joints + n_noise
    out = np.empty((n_pts, n_ch))
    du = np.empty((n_pts, n_ch)) if want_grad else np.empty((0, n_ch))
    dv = np.empty((n_pts, n_ch)) if want_grad else np.empty((0, n_ch))
    corners = np.empty(4)
    for i in range(n_pts):
        b = bidx[i]
        x0, x1, fx, in_x = _corner(points[i, 0], width)
        y0, y1, fy, in_y = _corner(points[i, 1], height)
        sx = (width - 1) * in_x
        sy = (height - 1) * in_y
        k, oy, ox, sign = keys[b, 0], keys[b, 1], keys[b, 2], keys[b, 3]
        for c in range(n_ch):
            if c < 2 * n_joints:
                j = c % n_joints
                corners[0] = gx[b, x0, j] * gy[b, y0, j]
                corners[1] = gx[b, x1, j] * gy[b, y0, j]
                corners[2] = gx[b, x0, j] * gy[b, y1, j]
                corners[3] = gx[b, x1, j] * gy[b, y1, j]
                if c >= n_joints:
                    d = depths[b, j]
                    for q in range(4):
                        corners[q] = corners[q] * d
            else:
                m = c - 2 * n_joints
                ry0, ry1 = (y0 + oy) % height, (y1 + oy) % height
                rx0, rx1 = (x0 + ox) % width, (x1 + ox) % width
                corners[0] = np.float64(noise[k, ry0, rx0, m]) * sign
                corners[1] = np.float64(noise[k, ry0, rx1, m]) * sign
                corners[2] = np.float64(noise[k, ry1, rx0, m]) * sign
                corners[3] = np.float64(noise[k, ry1, rx1, m]) * sign
            top = (1.0 - fx) * corners[0] + fx * corners[1]
            bot = (1.0 - fx) * corners[2] + fx * corners[3]
            out[i, c] = (1.0 - fy) * top + fy * bot
            if want_grad:
                du[i, c] = ((1.0 - fy) * (corners[1] - corners[0])
                            + fy * (corners[3] - corners[2])) * sx
                dv[i, c] = (bot - top) * sy
    return out, du, dv

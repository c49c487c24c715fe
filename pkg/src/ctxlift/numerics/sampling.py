"""Differentiable bilinear sampling of feature maps at normalized points.

Conventions
-----------
A point ``(u, v)`` in ``[0, 1]^2`` addresses a ``H x W`` grid with corners
aligned to cell centers: ``u = 0`` is column 0 and ``u = 1`` is column
``W - 1`` (same for ``v`` and rows). Points outside the unit square are
clamped to the border, so the coordinate gradient is zero there.
"""
import numpy as np

from .tensor import ShapeError, Tensor, active_tape, as_tensor, make_result


class GridSource:
    """Read-only, non-differentiable batch of feature maps.

    Subclasses expose ``shape = (B, H, W, C)`` and ``gather(b, rows, cols)``
    returning an ``(N, C)`` float64 array for flat index arrays of length N.
    Lets callers evaluate maps lazily instead of holding them in memory.
    """

    shape = None

    def gather(self, b, rows, cols):
        raise NotImplementedError

    def interpolate(self, b, points, want_grad):
        """Bilinear values at flat ``points`` (N, 2) of maps ``b`` (N,).

        Returns ``(values, d_du, d_dv)``, each (N, C); the derivatives are None
        unless ``want_grad``. Subclasses may override with a fused kernel.
        """
        _, height, width, _ = self.shape
        x0, x1, y0, y1, fx, fy, in_x, in_y = grid_coords(points, height, width)
        v00 = self.gather(b, y0, x0)
        v01 = self.gather(b, y0, x1)
        v10 = self.gather(b, y1, x0)
        v11 = self.gather(b, y1, x1)
        fxc, fyc = fx[:, None], fy[:, None]
        top = (1.0 - fxc) * v00 + fxc * v01
        bot = (1.0 - fxc) * v10 + fxc * v11
        out = (1.0 - fyc) * top + fyc * bot
        if not want_grad:
            return out, None, None
        du = ((1.0 - fyc) * (v01 - v00) + fyc * (v11 - v10)) * ((width - 1) * in_x)[:, None]
        dv = (bot - top) * ((height - 1) * in_y)[:, None]
        return out, du, dv


class ArrayGrid(GridSource):
    """GridSource over a dense ``(B, H, W, C)`` array."""

    def __init__(self, data):
        data = np.asarray(data)
        if data.ndim != 4:
            raise ShapeError(f"expected (B, H, W, C) maps, got {data.shape}")
        self.data = data
        self.shape = data.shape

    def gather(self, b, rows, cols):
        return np.asarray(self.data[b, rows, cols], dtype=np.float64)


def grid_coords(points, height, width):
    """Clamped pixel coordinates, lower corner indices and fractional parts."""
    x = points[..., 0] * (width - 1)
    y = points[..., 1] * (height - 1)
    in_x = (x >= 0.0) & (x <= width - 1)
    in_y = (y >= 0.0) & (y <= height - 1)
    x = np.clip(x, 0.0, width - 1)
    y = np.clip(y, 0.0, height - 1)
    x0 = np.minimum(np.floor(x), max(width - 2, 0)).astype(np.intp)
    y0 = np.minimum(np.floor(y), max(height - 2, 0)).astype(np.intp)
    fx = x - x0
    fy = y - y0
    x1 = np.minimum(x0 + 1, width - 1)
    y1 = np.minimum(y0 + 1, height - 1)
    return x0, x1, y0, y1, fx, fy, in_x, in_y


def bilinear_sample(fmap, points):
    """Sample ``fmap`` at normalized ``points``.

    Parameters
    ----------
    fmap : Tensor of shape (H, W, C) or (B, H, W, C), or a GridSource
        Feature maps. Tensors are differentiable; a GridSource is constant.
    points : Tensor of shape (..., 2) or (B, ..., 2)
        ``(u, v)`` locations; leading axis is the batch axis for batched maps.

    Returns
    -------
    Tensor of shape ``points.shape[:-1] + (C,)``.
    """
    points = as_tensor(points)
    if points.shape[-1] != 2:
        raise ShapeError(f"points must end in 2 coordinates, got {points.shape}")
    if isinstance(fmap, GridSource):
        source, map_tensor = fmap, None
        batched = True
    else:
        map_tensor = as_tensor(fmap)
        batched = map_tensor.ndim == 4
        if map_tensor.ndim not in (3, 4):
            raise ShapeError(f"feature map must be 3-D or 4-D, got {map_tensor.shape}")
        data = map_tensor.data if batched else map_tensor.data[None]
        source = ArrayGrid(data)
    nb, height, width, channels = source.shape

    lead = points.shape[:-1]
    flat = points.data.reshape(-1, 2)
    if batched:
        if not lead or lead[0] != nb:
            raise ShapeError(f"points batch {lead[:1]} does not match maps batch {nb}")
        per = int(np.prod(lead[1:], dtype=np.int64))
        b = np.repeat(np.arange(nb), per)
    else:
        b = np.zeros(flat.shape[0], dtype=np.intp)

    want_points = points.requires_grad and active_tape() is not None
    out, dx, dy = source.interpolate(b, flat, want_points)

    parents = (points,) if map_tensor is None else (points, map_tensor)

    def vjp(g, needs):
        g2 = g.reshape(-1, channels)
        gp = gm = None
        if needs[0]:
            gp = np.stack([(g2 * dx).sum(axis=1), (g2 * dy).sum(axis=1)], axis=1)
            gp = gp.reshape(points.shape)
        if len(needs) > 1 and needs[1]:
            x0, x1, y0, y1, fx, fy, _, _ = grid_coords(flat, height, width)
            full = np.zeros((nb, height, width, channels))
            w00 = (1.0 - fx) * (1.0 - fy)
            w01 = fx * (1.0 - fy)
            w10 = (1.0 - fx) * fy
            w11 = fx * fy
            for w, r, c in ((w00, y0, x0), (w01, y0, x1), (w10, y1, x0), (w11, y1, x1)):
                np.add.at(full, (b, r, c), w[:, None] * g2)
            gm = full if batched else full[0]
        return (gp,) if map_tensor is None else (gp, gm)

    return make_result(out.reshape(lead + (channels,)), parents, vjp, "bilinear_sample")


__all__ = ["ArrayGrid", "GridSource", "Tensor", "bilinear_sample", "grid_coords"]

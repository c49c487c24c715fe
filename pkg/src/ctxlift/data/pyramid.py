"""Synthetic multi-resolution feature maps standing in for detector byproducts.

Each level carries, per joint, a unit Gaussian blob at the true 2D location
(position channels), the same blob scaled by the joint's normalized depth
(depth channels), and Gaussian pixel noise in the remaining channels.

Noise fields come from a seeded :class:`NoiseBank`; a sample selects one field
plus a cyclic shift and a sign. This keeps the 20k-sample training sets
renderable on demand (dense storage would need ~16 GB) while every sample
still sees N(0, noise_std^2) pixel noise.
"""
from dataclasses import dataclass, field

import numpy as np

from ..numerics.sampling import GridSource
from ._kernels import rendered_interpolate

LEVEL_SHAPES = ((64, 48), (32, 24), (16, 12), (8, 6))
DOWNSAMPLE_FACTORS = (4, 8, 16, 32)
N_CHANNELS = 48
SIGMA_PX = 2.0
NOISE_STD = 0.1


@dataclass
class FeaturePyramid:
    """One sample's maps: ``levels[l]`` has shape (H_l, W_l, C_l)."""

    levels: list
    downsample_factors: tuple = DOWNSAMPLE_FACTORS

    def __post_init__(self):
        if not self.levels:
            raise ValueError("a pyramid needs at least one level")
        if len(self.downsample_factors) != len(self.levels):
            raise ValueError("one downsample factor per level is required")
        if any(b <= a for a, b in zip(self.downsample_factors, self.downsample_factors[1:])):
            raise ValueError("downsample factors must be strictly increasing")
        for a, b in zip(self.levels, self.levels[1:]):
            if b.shape[0] > a.shape[0] or b.shape[1] > a.shape[1]:
                raise ValueError("level extents must be non-increasing")

    @property
    def n_levels(self):
        return len(self.levels)


@dataclass
class NoiseBank:
    """Seeded pool of per-level noise fields, shape (size, H, W, n_noise)."""

    seed: int = 0
    size: int = 64
    n_noise: int = N_CHANNELS - 34
    std: float = NOISE_STD
    shapes: tuple = LEVEL_SHAPES
    fields: list = field(init=False, repr=False)

    def __post_init__(self):
        rng = np.random.default_rng([self.seed, 0x6E6F])
        self.fields = [
            (rng.standard_normal((self.size, h, w, self.n_noise)) * self.std).astype(np.float32)
            for h, w in self.shapes
        ]

    def draw_key(self, rng):
        """(field index, row shift, col shift, sign) for one sample."""
        h, w = self.shapes[0]
        return np.array([rng.integers(self.size), rng.integers(h), rng.integers(w),
                         rng.choice((-1, 1))], dtype=np.int64)

    def lookup(self, level, keys, rows, cols):
        h, w = self.shapes[level]
        vals = self.fields[level][keys[:, 0], (rows + keys[:, 1]) % h, (cols + keys[:, 2]) % w]
        return vals.astype(np.float64) * keys[:, 3:4]


def _axis_table(coord, n, sigma):
    """exp(-(i - coord * (n - 1))^2 / (2 sigma^2)) for i in 0..n-1, shape (..., n, J)."""
    centers = np.asarray(coord)[..., None, :] * (n - 1)
    grid = np.arange(n, dtype=np.float64)[:, None]
    return np.exp(-((grid - centers) ** 2) / (2.0 * sigma * sigma))


def render_level(gt2d, depths, key, bank, level, sigma_px=SIGMA_PX):
    """Dense (H, W, C) map of one level for one sample."""
    h, w = bank.shapes[level]
    gx = _axis_table(gt2d[:, 0], w, sigma_px)  # (W, J)
    gy = _axis_table(gt2d[:, 1], h, sigma_px)  # (H, J)
    pos = gx[None, :, :] * gy[:, None, :]
    rows, cols = np.meshgrid(np.arange(h), np.arange(w), indexing="ij")
    keys = np.broadcast_to(key, (h * w, 4))
    noise = bank.lookup(level, keys, rows.ravel(), cols.ravel()).reshape(h, w, -1)
    return np.concatenate([pos, pos * depths, noise], axis=-1)


def render_pyramid(gt2d, depths, rng, bank=None, levels=None):
    """Render all levels from ground-truth 2D joints and normalized depths.

    ``rng`` chooses the sample's noise field; the pyramid never sees detections.
    Returns ``(pyramid, key)``.
    """
    bank = default_bank() if bank is None else bank
    gt2d = np.asarray(gt2d, dtype=np.float64)
    depths = np.asarray(depths, dtype=np.float64)
    key = bank.draw_key(rng)
    idx = range(len(bank.shapes)) if levels is None else levels
    maps = [render_level(gt2d, depths, key, bank, l) for l in idx]
    factors = tuple(DOWNSAMPLE_FACTORS[l] for l in idx)
    return FeaturePyramid(maps, factors), key


_DEFAULT_BANK = None


def default_bank():
    global _DEFAULT_BANK
    if _DEFAULT_BANK is None:
        _DEFAULT_BANK = NoiseBank()
    return _DEFAULT_BANK


class RenderedGrid(GridSource):
    """Lazy batch of one pyramid level, evaluated only at requested cells.

    Produces exactly the values :func:`render_level` would store.
    """

    def __init__(self, gt2d, depths, keys, bank, level, sigma_px=SIGMA_PX):
        h, w = bank.shapes[level]
        n_joints = gt2d.shape[1]
        self.shape = (gt2d.shape[0], h, w, 2 * n_joints + bank.n_noise)
        self._gx = _axis_table(gt2d[..., 0], w, sigma_px)  # (B, W, J)
        self._gy = _axis_table(gt2d[..., 1], h, sigma_px)  # (B, H, J)
        self._depths = np.ascontiguousarray(depths, dtype=np.float64)
        self._keys = np.ascontiguousarray(keys, dtype=np.int64)
        self._bank = bank
        self._level = level

    def interpolate(self, b, points, want_grad):
        _, h, w, _ = self.shape
        out, du, dv = rendered_interpolate(
            np.ascontiguousarray(points, dtype=np.float64), np.asarray(b, dtype=np.int64),
            self._gx, self._gy, self._depths, self._keys, self._bank.fields[self._level],
            h, w, want_grad)
        return (out, du, dv) if want_grad else (out, None, None)

    def gather(self, b, rows, cols):
        pos = self._gx[b, cols] * self._gy[b, rows]
        noise = self._bank.lookup(self._level, self._keys[b], rows, cols)
        return np.concatenate([pos, pos * self._depths[b], noise], axis=1)


class StoredGrid(GridSource):
    """Batch view over stored (N, H, W, C) maps selected by sample indices."""

    def __init__(self, maps, indices):
        self._maps = maps
        self._idx = np.asarray(indices)
        self.shape = (len(self._idx),) + maps.shape[1:]

    def gather(self, b, rows, cols):
        return self._maps[self._idx[b], rows, cols].astype(np.float64)


@dataclass
class PyramidBatch:
    """Per-level GridSources for a batch, as consumed by the model."""

    levels: list
    downsample_factors: tuple = DOWNSAMPLE_FACTORS

    @property
    def batch_size(self):
        return self.levels[0].shape[0]

    @classmethod
    def from_pyramids(cls, pyramids):
        from ..numerics.sampling import ArrayGrid

        first = pyramids[0]
        levels = [ArrayGrid(np.stack([np.asarray(p.levels[l], dtype=np.float64) for p in pyramids]))
                  for l in range(first.n_levels)]
        return cls(levels, tuple(first.downsample_factors))

    def select(self, active):
        """Keep only levels whose mask entry is true."""
        keep = [l for l, on in enumerate(active) if on]
        return PyramidBatch([self.levels[l] for l in keep],
                            tuple(self.downsample_factors[l] for l in keep))

"""Synthetic oracle dataset: 3D poses, exact and noisy 2D projections, pyramids."""
from dataclasses import dataclass, field

import numpy as np

from .camera import BODY_TO_CAMERA, Camera, normalized_depth, project_camera
from .noise import NoiseSpec, corrupt_pose
from .pyramid import (
    DOWNSAMPLE_FACTORS, FeaturePyramid, NoiseBank, PyramidBatch, RenderedGrid, StoredGrid,
    render_level,
)
from .skeleton import H36M_TOPOLOGY, gen_skeleton_sequence

FRAME_INTERVAL = 1.0 / 50.0
VIEW_MARGIN = 0.1
MAX_TRIES = 200


@dataclass
class SyntheticSample:
    """One frame: ``gt2d`` is the exact projection of ``gt3d``; the pyramid is
    rendered from ``gt2d`` and depths, never from ``det2d``."""

    gt3d: np.ndarray
    gt2d: np.ndarray
    det2d: np.ndarray
    depth: np.ndarray
    pyramid: FeaturePyramid
    seed_record: tuple = ()


@dataclass
class PoseDataset:
    """Column-oriented collection of frames.

    Pyramids are either stored densely (``maps``: one (N, H, W, C) array per
    level, e.g. after reading a file) or rendered on demand from ``noise_keys``
    and ``bank``. Frames of the same ``seq_id`` are consecutive, ordered by
    ``frame``.
    """

    gt3d: np.ndarray
    gt2d: np.ndarray
    det2d: np.ndarray
    depth: np.ndarray
    seq_id: np.ndarray
    frame: np.ndarray
    seed_records: np.ndarray
    noise_keys: np.ndarray = None
    bank: NoiseBank = None
    maps: list = None
    downsample_factors: tuple = DOWNSAMPLE_FACTORS
    frame_interval: float = FRAME_INTERVAL
    meta: dict = field(default_factory=dict)

    def __len__(self):
        return len(self.gt3d)

    @property
    def n_joints(self):
        return self.gt3d.shape[1]

    @property
    def n_levels(self):
        if self.maps is not None:
            return len(self.maps)
        return 0 if self.bank is None else len(self.bank.shapes)

    @property
    def has_pyramids(self):
        return self.n_levels > 0

    def pyramid_batch(self, indices):
        idx = np.asarray(indices)
        if self.maps is not None:
            levels = [StoredGrid(m, idx) for m in self.maps]
        elif self.bank is not None:
            levels = [RenderedGrid(self.gt2d[idx], self.depth[idx], self.noise_keys[idx],
                                   self.bank, l) for l in range(len(self.bank.shapes))]
        else:
            raise ValueError("dataset carries no feature pyramids")
        return PyramidBatch(levels, tuple(self.downsample_factors))

    def pyramid(self, i):
        if self.maps is not None:
            return FeaturePyramid([np.asarray(m[i], dtype=np.float64) for m in self.maps],
                                  tuple(self.downsample_factors))
        levels = [render_level(self.gt2d[i], self.depth[i], self.noise_keys[i], self.bank, l)
                  for l in range(len(self.bank.shapes))]
        return FeaturePyramid(levels, tuple(self.downsample_factors))

    def sample(self, i):
        return SyntheticSample(self.gt3d[i], self.gt2d[i], self.det2d[i], self.depth[i],
                               self.pyramid(i) if self.has_pyramids else None,
                               tuple(self.seed_records[i]))

    def materialize(self):
        """Dense copy with every pyramid stored as float32."""
        if self.maps is not None or not self.has_pyramids:
            return self
        maps = []
        for l in range(len(self.bank.shapes)):
            maps.append(np.stack([
                render_level(self.gt2d[i], self.depth[i], self.noise_keys[i], self.bank, l)
                for i in range(len(self))
            ]).astype(np.float32) if len(self) else
                np.zeros((0,) + self.bank.shapes[l] + (2 * self.n_joints + self.bank.n_noise,),
                         np.float32))
        return PoseDataset(self.gt3d, self.gt2d, self.det2d, self.depth, self.seq_id,
                           self.frame, self.seed_records, maps=maps,
                           downsample_factors=self.downsample_factors,
                           frame_interval=self.frame_interval, meta=dict(self.meta))

    def subset(self, indices):
        idx = np.asarray(indices, dtype=np.int64)
        return PoseDataset(
            self.gt3d[idx], self.gt2d[idx], self.det2d[idx], self.depth[idx], self.seq_id[idx],
            self.frame[idx], self.seed_records[idx],
            None if self.noise_keys is None else self.noise_keys[idx], self.bank,
            None if self.maps is None else [m[idx] for m in self.maps],
            self.downsample_factors, self.frame_interval, dict(self.meta))

    def windows(self, frames):
        """Index windows (N, frames) centered on every frame, edge-replicated
        within each sequence."""
        if frames % 2 != 1:
            raise ValueError("window length must be odd")
        half = frames // 2
        n = len(self)
        starts = np.zeros(n, dtype=np.int64)
        ends = np.zeros(n, dtype=np.int64)
        boundaries = np.flatnonzero(np.diff(self.seq_id)) + 1
        for lo, hi in zip(np.r_[0, boundaries], np.r_[boundaries, n]):
            starts[lo:hi], ends[lo:hi] = lo, hi - 1
        offsets = np.arange(-half, half + 1)
        return np.clip(np.arange(n)[:, None] + offsets, starts[:, None], ends[:, None])


def _place_sequence(body_poses, rng, camera):
    """Camera-frame root-relative poses, projections and depths, or None if out of view."""
    cam = body_poses @ BODY_TO_CAMERA.T
    shift = np.array([rng.uniform(-250.0, 250.0), rng.uniform(-250.0, 250.0),
                      camera.distance_mm])
    absolute = cam + shift
    if np.any(absolute[..., 2] <= 0):
        return None
    uv, z = project_camera(absolute, camera)
    if np.any(uv < VIEW_MARGIN) or np.any(uv > 1.0 - VIEW_MARGIN):
        return None
    return cam - cam[:, :1], uv, normalized_depth(z, z[:, :1], camera)


def generate_sequences(n_sequences, frames, seed=0, noise=NoiseSpec(), camera=Camera(),
                       topology=H36M_TOPOLOGY, bank=None, max_step=0.04):
    """Generate ``n_sequences`` clips of ``frames`` frames each.

    Sequence ``s`` draws everything from ``default_rng([seed, s])`` so content
    does not depend on generation order.
    """
    bank = NoiseBank(seed) if bank is None else bank
    cols = {k: [] for k in ("gt3d", "gt2d", "det2d", "depth", "keys", "seq", "frame", "seed")}
    for s in range(n_sequences):
        rng = np.random.default_rng([seed, s])
        for _ in range(MAX_TRIES):
            placed = _place_sequence(gen_skeleton_sequence(topology, frames, rng, max_step),
                                     rng, camera)
            if placed is not None:
                break
        else:
            raise RuntimeError(f"sequence {s}: could not frame the subject in view")
        gt3d, gt2d, depth = placed
        cols["gt3d"].append(gt3d)
        cols["gt2d"].append(gt2d)
        cols["depth"].append(depth)
        cols["det2d"].append(corrupt_pose(gt2d, noise, rng))
        cols["keys"].append(np.stack([bank.draw_key(rng) for _ in range(frames)]))
        cols["seq"].append(np.full(frames, s))
        cols["frame"].append(np.arange(frames))
        cols["seed"].append(np.tile([seed, s], (frames, 1)))
    j = topology.n_joints

    def cat(name, shape):
        return np.concatenate(cols[name]) if cols[name] else np.zeros((0,) + shape)

    return PoseDataset(
        cat("gt3d", (j, 3)), cat("gt2d", (j, 2)), cat("det2d", (j, 2)), cat("depth", (j,)),
        cat("seq", ()).astype(np.int64), cat("frame", ()).astype(np.int64),
        cat("seed", (2,)).astype(np.int64), cat("keys", (4,)).astype(np.int64), bank,
        meta={"seed": seed, "noise": noise, "camera": camera},
    )


def generate_dataset(n_samples, seed=0, noise=NoiseSpec(), camera=Camera(),
                     topology=H36M_TOPOLOGY, bank=None):
    """Independent single-frame samples (one-frame sequences)."""
    return generate_sequences(n_samples, 1, seed, noise, camera, topology, bank)

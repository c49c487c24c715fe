"""Simulated 2D detector errors."""
from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class NoiseSpec:
    """Detector noise in normalized image units.

    Every joint gets isotropic Gaussian jitter of std ``gaussian_sigma``; with
    probability ``outlier_prob`` that jitter is replaced by an offset of
    uniformly random direction and magnitude in ``[0, outlier_radius]``.
    """

    gaussian_sigma: float = 0.02
    outlier_prob: float = 0.05
    outlier_radius: float = 0.2

    def __post_init__(self):
        if self.gaussian_sigma < 0:
            raise ValueError("gaussian_sigma must be >= 0")
        if not 0.0 <= self.outlier_prob <= 1.0:
            raise ValueError("outlier_prob must lie in [0, 1]")
        if self.outlier_radius < 0:
            raise ValueError("outlier_radius must be >= 0")


def corrupt_pose(gt2d, spec, rng, return_outliers=False):
    """Noisy copy of ``gt2d`` (..., J, 2).

    With ``return_outliers`` also returns the boolean (..., J) outlier mask.
    """
    gt2d = np.asarray(gt2d, dtype=np.float64)
    lead = gt2d.shape[:-1]
    jitter = rng.normal(0.0, 1.0, size=gt2d.shape) * spec.gaussian_sigma
    outlier = rng.random(lead) < spec.outlier_prob
    angle = rng.uniform(0.0, 2 * np.pi, size=lead)
    radius = rng.uniform(0.0, spec.outlier_radius, size=lead)
    jump = np.stack([np.cos(angle), np.sin(angle)], axis=-1) * radius[..., None]
    det = gt2d + np.where(outlier[..., None], jump, jitter)
    return (det, outlier) if return_outliers else det

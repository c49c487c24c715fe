"""Input validation helpers shared by the estimator and the CLI."""
import numpy as np
from sklearn.utils.validation import check_array

from .data import PoseDataset


def check_pose2d(x, n_joints=None):
    """Validate detections: finite float array of shape (N, J, 2).

    A flat (N, 2*J) array is reshaped when ``n_joints`` is given.
    """
    arr = np.asarray(x, dtype=np.float64)
    if arr.ndim == 2 and n_joints is not None and arr.shape[1] == 2 * n_joints:
        arr = arr.reshape(len(arr), n_joints, 2)
    if arr.ndim != 3 or arr.shape[-1] != 2:
        raise ValueError(f"2D poses must have shape (N, J, 2), got {arr.shape}")
    check_array(arr.reshape(len(arr), -1), ensure_min_samples=1)
    if n_joints is not None and arr.shape[1] != n_joints:
        raise ValueError(f"expected {n_joints} joints, got {arr.shape[1]}")
    return arr


def check_pose3d(y, n_joints=None):
    """Validate 3D poses: finite float array of shape (N, J, 3)."""
    arr = np.asarray(y, dtype=np.float64)
    if arr.ndim != 3 or arr.shape[-1] != 3:
        raise ValueError(f"3D poses must have shape (N, J, 3), got {arr.shape}")
    check_array(arr.reshape(len(arr), -1), ensure_min_samples=1)
    if n_joints is not None and arr.shape[1] != n_joints:
        raise ValueError(f"expected {n_joints} joints, got {arr.shape[1]}")
    return arr


def as_pose_dataset(X, y=None, require_targets=False):
    """Coerce ``X`` (PoseDataset or (N, J, 2) detections) to a PoseDataset.

    ``y`` replaces the ground truth when given. Bare arrays carry no
    pyramids, so they only suit the context-free variant.
    """
    if isinstance(X, PoseDataset):
        ds = X
        if y is not None:
            gt = check_pose3d(y, ds.n_joints)
            if len(gt) != len(ds):
                raise ValueError(f"y has {len(gt)} samples, X has {len(ds)}")
            ds = PoseDataset(gt, ds.gt2d, ds.det2d, ds.depth, ds.seq_id, ds.frame,
                             ds.seed_records, ds.noise_keys, ds.bank, ds.maps,
                             ds.downsample_factors, ds.frame_interval, dict(ds.meta))
        check_pose2d(ds.det2d, ds.n_joints)
        return ds
    det = check_pose2d(X)
    n, j = det.shape[:2]
    if y is None:
        if require_targets:
            raise ValueError("targets y are required")
        gt = np.zeros((n, j, 3))
    else:
        gt = check_pose3d(y, j)
        if len(gt) != n:
            raise ValueError(f"y has {len(gt)} samples, X has {n}")
    return PoseDataset(gt, det, det, np.zeros((n, j)), np.arange(n, dtype=np.int64),
                       np.zeros(n, dtype=np.int64), np.zeros((n, 2), dtype=np.int64))


__all__ = ["as_pose_dataset", "check_pose2d", "check_pose3d"]

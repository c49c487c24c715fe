"""Pose evaluation metrics and similarity (Procrustes) alignment.

Poses are arrays of shape (J, 3) or batches (N, J, 3) in millimeters.
Sequences are (T, J, 3). Per-sample results are averaged in index order so
the aggregate is deterministic.
"""
import json
import warnings
from dataclasses import asdict, dataclass

import numpy as np

PCK_THRESHOLD_MM = 150.0
AUC_THRESHOLDS_MM = np.arange(5.0, 150.0 + 1e-9, 5.0)


class AlignmentError(ValueError):
    """The prediction has zero spatial variance, so no similarity fit exists."""


def _pair(pred, gt):
    pred = np.asarray(pred, dtype=np.float64)
    gt = np.asarray(gt, dtype=np.float64)
    if pred.shape != gt.shape:
        raise ValueError(f"pose shapes differ: {pred.shape} vs {gt.shape}")
    if pred.ndim < 2 or pred.shape[-1] != 3:
        raise ValueError(f"poses must end in (J, 3), got {pred.shape}")
    return pred, gt


def root_center(pose, root=0):
    """Translate so that joint ``root`` sits at the origin (exactly)."""
    pose = np.asarray(pose, dtype=np.float64)
    centered = pose - pose[..., root:root + 1, :]
    centered[..., root, :] = 0.0
    return centered


def joint_errors(pred, gt):
    """Per-joint Euclidean distances, shape (..., J)."""
    pred, gt = _pair(pred, gt)
    return np.sqrt(((pred - gt) ** 2).sum(axis=-1))


def mpjpe(pred, gt):
    """Mean per-joint position error over all samples and joints."""
    return float(joint_errors(pred, gt).mean())


def procrustes_align(pred, gt, return_transform=False):
    """Similarity-align one (J, 3) prediction onto ``gt``.

    Closed-form solution from the SVD of the cross-covariance, with the last
    singular direction flipped when the fit would otherwise be a reflection.

    Parameters
    ----------
    pred, gt : array_like of shape (J, 3)
    return_transform : bool
        Also return ``(R, s, t)`` such that ``aligned = s * pred @ R.T + t``.

    Raises
    ------
    AlignmentError
        If ``pred`` has (numerically) zero variance.
    """
    pred, gt = _pair(pred, gt)
    if pred.ndim != 2 or pred.shape[0] < 3:
        raise ValueError("procrustes_align expects a single pose with at least 3 joints")
    mu_p = pred.mean(axis=0)
    mu_g = gt.mean(axis=0)
    p0 = pred - mu_p
    g0 = gt - mu_g
    var_p = (p0 ** 2).sum()
    if not var_p > 1e-12 * max(1.0, (g0 ** 2).sum()):
        raise AlignmentError("prediction is degenerate (all joints coincide)")
    u, sig, vt = np.linalg.svd(g0.T @ p0)
    d = np.ones(3)
    if np.linalg.det(u @ vt) < 0:
        d[-1] = -1.0
    rot = (u * d) @ vt
    scale = (sig * d).sum() / var_p
    trans = mu_g - scale * rot @ mu_p
    aligned = scale * p0 @ rot.T + mu_g
    if return_transform:
        return aligned, (rot, scale, trans)
    return aligned


def _aligned_batch(pred, gt):
    """Align each sample; returns (aligned, ok mask)."""
    pred, gt = _pair(pred, gt)
    flat_p = pred.reshape(-1, *pred.shape[-2:])
    flat_g = gt.reshape(-1, *gt.shape[-2:])
    aligned = np.empty_like(flat_p)
    ok = np.ones(len(flat_p), dtype=bool)
    for i in range(len(flat_p)):
        try:
            aligned[i] = procrustes_align(flat_p[i], flat_g[i])
        except AlignmentError:
            ok[i] = False
            aligned[i] = flat_p[i]
    return aligned, flat_g, ok


def pa_mpjpe(pred, gt, return_failures=False):
    """MPJPE after per-sample similarity alignment.

    Degenerate samples are excluded. With a single pose, a degenerate
    prediction raises :class:`AlignmentError`.
    """
    pred, gt = _pair(pred, gt)
    if pred.ndim == 2:
        value = mpjpe(procrustes_align(pred, gt), gt)
        return (value, 0) if return_failures else value
    aligned, flat_g, ok = _aligned_batch(pred, gt)
    failures = int((~ok).sum())
    if not ok.any():
        raise AlignmentError("every sample failed to align")
    value = float(joint_errors(aligned[ok], flat_g[ok]).mean())
    return (value, failures) if return_failures else value


def _check_nonempty(errors):
    if errors.size == 0:
        raise ValueError("pck/auc need at least one (sample, joint) pair")


def pck(preds, gts, threshold_mm=PCK_THRESHOLD_MM):
    """Percent of (sample, joint) pairs with error strictly below the threshold."""
    errors = joint_errors(preds, gts)
    _check_nonempty(errors)
    return 100.0 * float((errors < threshold_mm).mean())


def auc(preds, gts, thresholds=AUC_THRESHOLDS_MM):
    """Mean PCK over the threshold grid (5 to 150 mm in 5 mm steps)."""
    errors = joint_errors(preds, gts)
    _check_nonempty(errors)
    curve = [(errors < t).mean() for t in thresholds]
    return 100.0 * float(np.mean(curve))


def mpjve(pred_seq, gt_seq):
    """MPJPE between first temporal differences of two (T, J, 3) sequences."""
    pred_seq, gt_seq = _pair(pred_seq, gt_seq)
    if pred_seq.ndim != 3 or pred_seq.shape[0] < 2:
        raise ValueError("mpjve needs sequences of shape (T, J, 3) with T >= 2")
    return mpjpe(np.diff(pred_seq, axis=0), np.diff(gt_seq, axis=0))


def sequence_mpjve(pred, gt, seq_id, frame):
    """Frame-weighted MPJVE over many sequences stored as flat (N, J, 3) arrays.

    Samples are grouped by ``seq_id`` and ordered by ``frame``; sequences
    shorter than two frames contribute nothing.
    """
    pred, gt = _pair(pred, gt)
    seq_id = np.asarray(seq_id)
    frame = np.asarray(frame)
    total, count = 0.0, 0
    for s in np.unique(seq_id):
        idx = np.flatnonzero(seq_id == s)
        idx = idx[np.argsort(frame[idx], kind="stable")]
        if len(idx) < 2:
            continue
        err = joint_errors(np.diff(pred[idx], axis=0), np.diff(gt[idx], axis=0))
        total += err.sum()
        count += err.size
    if count == 0:
        raise ValueError("no sequence has two or more frames")
    return float(total / count)


@dataclass
class MetricsReport:
    """Aggregate evaluation of a prediction set.

    ``alignment_failures`` counts samples left out of PA-MPJPE.
    """

    mpjpe_mm: float
    pa_mpjpe_mm: float
    pck_percent: float
    auc_percent: float
    sample_count: int
    mpjve_mm: float = None
    alignment_failures: int = 0

    FIELDS = ("mpjpe_mm", "pa_mpjpe_mm", "pck_percent", "auc_percent", "mpjve_mm",
              "sample_count", "alignment_failures")

    def to_dict(self):
        d = asdict(self)
        return {k: d[k] for k in self.FIELDS}

    def to_text(self):
        lines = []
        for key, value in self.to_dict().items():
            if value is None:
                text = "none"
            elif isinstance(value, float):
                text = repr(value)
            else:
                text = str(value)
            lines.append(f"{key} = {text}")
        return "\n".join(lines) + "\n"

    def to_json(self):
        return json.dumps(self.to_dict(), indent=2, sort_keys=False) + "\n"

    @classmethod
    def from_dict(cls, data):
        unknown = set(data) - set(cls.FIELDS)
        if unknown:
            raise ValueError(f"unknown report keys: {sorted(unknown)}")
        return cls(**data)


def evaluate(pred, gt, seq_id=None, frame=None):
    """Build a :class:`MetricsReport` for (N, J, 3) root-relative poses."""
    pred, gt = _pair(pred, gt)
    if pred.ndim != 3 or len(pred) == 0:
        raise ValueError("evaluate expects a non-empty (N, J, 3) batch")
    pa, failures = pa_mpjpe(pred, gt, return_failures=True)
    if failures:
        warnings.warn(f"{failures} degenerate predictions excluded from PA-MPJPE",
                      RuntimeWarning, stacklevel=2)
    velocity = None
    if seq_id is not None and frame is not None:
        try:
            velocity = sequence_mpjve(pred, gt, seq_id, frame)
        except ValueError:
            velocity = None
    return MetricsReport(
        mpjpe_mm=mpjpe(pred, gt), pa_mpjpe_mm=pa, pck_percent=pck(pred, gt),
        auc_percent=auc(pred, gt), sample_count=len(pred), mpjve_mm=velocity,
        alignment_failures=failures,
    )


__all__ = [
    "AUC_THRESHOLDS_MM", "AlignmentError", "MetricsReport", "PCK_THRESHOLD_MM", "auc",
    "evaluate", "joint_errors", "mpjpe", "mpjve", "pa_mpjpe", "pck", "procrustes_align",
    "root_center", "sequence_mpjve",
]

"""Pose regression losses over batched (B, J, 3) tensors."""
from .. import numerics as nx
from ..numerics import ShapeError, as_tensor

LOSS_KINDS = ("euclidean", "squared")


def l2_loss(pred, gt, kind="euclidean"):
    """Mean per-joint Euclidean distance (``euclidean``) or mean squared
    coordinate error (``squared``)."""
    pred, gt = as_tensor(pred), as_tensor(gt)
    if pred.shape != gt.shape:
        raise ShapeError(f"loss: prediction {pred.shape} vs target {gt.shape}")
    diff = pred - gt
    if kind == "euclidean":
        return nx.mean(nx.norm(diff, axis=-1))
    if kind == "squared":
        return nx.mean(nx.square(diff))
    raise ValueError(f"loss kind must be one of {LOSS_KINDS}, got {kind!r}")

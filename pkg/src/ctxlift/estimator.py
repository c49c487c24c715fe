"""scikit-learn style wrapper around the lifting network."""
from sklearn.base import BaseEstimator, RegressorMixin
from sklearn.utils.validation import check_is_fitted

from .metrics import mpjpe
from .model import ModelConfig
from .training import TrainConfig, predict_dataset, train
from .validation import as_pose_dataset, check_pose3d


class ContextAwareLifter(RegressorMixin, BaseEstimator):
    """Lift detected 2D poses (plus feature pyramids) to root-relative 3D.

    Parameters
    ----------
    variant : {"step0", "step1", "step2", "step3"}, default="step3"
        Ablation rung; every rung but ``step0`` needs pyramids.
    dim : int, default=128
        Token width C.
    n_deform_layers, n_fusion_layers, n_joint_layers : int, default=4
    attention_heads : int, default=8
    deform_heads : int, default=4
    deform_points : int, default=4
    frames : int, default=1
        Odd temporal window; windows are taken within each sequence.
    active_levels : tuple of bool, default=(True, True, True, True)
    epochs : int, default=50
    batch_size : int, default=256
    lr : float, default=6.4e-3
    loss_kind : {"euclidean", "squared"}, default="euclidean"
    random_state : int, default=0

    Attributes
    ----------
    params_ : ParameterSet
    config_ : ModelConfig
    history_ : list of EpochRecord
    n_joints_ : int

    Notes
    -----
    ``X`` is a :class:`~ctxlift.data.PoseDataset` (detections, pyramids and,
    for ``fit``, targets). ``step0`` also accepts a bare (N, J, 2) array.
    """

    def __init__(self, variant="step3", dim=128, n_deform_layers=4, n_fusion_layers=4,
                 n_joint_layers=4, attention_heads=8, deform_heads=4, deform_points=4,
                 frames=1, active_levels=(True, True, True, True), epochs=50, batch_size=256,
                 lr=6.4e-3, loss_kind="euclidean", random_state=0):
        self.variant = variant
        self.dim = dim
        self.n_deform_layers = n_deform_layers
        self.n_fusion_layers = n_fusion_layers
        self.n_joint_layers = n_joint_layers
        self.attention_heads = attention_heads
        self.deform_heads = deform_heads
        self.deform_points = deform_points
        self.frames = frames
        self.active_levels = active_levels
        self.epochs = epochs
        self.batch_size = batch_size
        self.lr = lr
        self.loss_kind = loss_kind
        self.random_state = random_state

    def _model_config(self, n_joints, n_levels):
        active = tuple(self.active_levels)
        if len(active) != n_levels:
            raise ValueError(f"active_levels has {len(active)} entries for {n_levels} levels")
        return ModelConfig(
            n_joints=n_joints, n_levels=n_levels, dim=self.dim,
            n_deform_layers=self.n_deform_layers, n_fusion_layers=self.n_fusion_layers,
            n_joint_layers=self.n_joint_layers, attention_heads=self.attention_heads,
            deform_heads=self.deform_heads, deform_points=self.deform_points,
            variant=self.variant, frames=self.frames, active_levels=active,
            level_channels=(48,) * n_levels)

    def fit(self, X, y=None, eval_set=None):
        """Train from scratch.

        Parameters
        ----------
        X : PoseDataset or array of shape (N, J, 2)
        y : array of shape (N, J, 3), optional
            Overrides the dataset's ground truth.
        eval_set : PoseDataset, optional
            Validation frames used for best-epoch selection.
        """
        ds = as_pose_dataset(X, y, require_targets=True)
        n_levels = ds.n_levels if ds.has_pyramids else len(tuple(self.active_levels))
        config = self._model_config(ds.n_joints, n_levels)
        tc = TrainConfig(epochs=self.epochs, batch_size=self.batch_size, lr=self.lr,
                         loss_kind=self.loss_kind, seed=self.random_state)
        val = None if eval_set is None else as_pose_dataset(eval_set, require_targets=True)
        result = train(config, ds, tc, val)
        self.params_ = result.params
        self.config_ = config
        self.history_ = result.log
        self.n_joints_ = ds.n_joints
        return self

    def predict(self, X):
        """Root-relative 3D joints in millimeters, shape (N, J, 3)."""
        check_is_fitted(self, "params_")
        ds = as_pose_dataset(X)
        if ds.n_joints != self.n_joints_:
            raise ValueError(f"expected {self.n_joints_} joints, got {ds.n_joints}")
        return predict_dataset(ds, self.params_, self.config_)

    def score(self, X, y=None, sample_weight=None):
        """Negative MPJPE (higher is better)."""
        ds = as_pose_dataset(X, y, require_targets=True)
        gt = check_pose3d(ds.gt3d)
        return -mpjpe(self.predict(ds), gt)


__all__ = ["ContextAwareLifter"]

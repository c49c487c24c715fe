"""Mini-batch training with per-epoch validation and best-checkpoint tracking."""
import time
from dataclasses import asdict, dataclass, fields

import numpy as np

from .. import numerics as nx
from ..metrics import mpjpe
from ..model import forward_single_frame, forward_temporal, init_params, predict
from .loss import LOSS_KINDS, l2_loss
from .optim import BASE_LR, LR_DECAY, AdamW, NonFiniteGradientError, clip_grad_norm, lr_schedule


class DivergenceError(FloatingPointError):
    """Training produced a non-finite loss or gradient.

    ``params`` holds the last good parameters and ``log`` the epochs so far.
    """

    def __init__(self, message, params=None, log=None):
        super().__init__(message)
        self.params = params
        self.log = log or []


@dataclass
class TrainConfig:
    """Optimization settings. ``epochs=50`` and ``batch_size=256`` are defaults;
    acceptance runs use 30 epochs."""

    epochs: int = 50
    batch_size: int = 256
    lr: float = BASE_LR
    lr_decay: float = LR_DECAY
    weight_decay: float = 0.01
    betas: tuple = (0.9, 0.999)
    eps: float = 1e-8
    grad_clip: float = 1.0
    loss_kind: str = "euclidean"
    seed: int = 0
    eval_batch_size: int = 1024

    def __post_init__(self):
        self.betas = tuple(float(b) for b in self.betas)
        if self.epochs < 1:
            raise ValueError("epochs must be >= 1")
        if self.batch_size < 1:
            raise ValueError("batch_size must be >= 1")
        if not 0.0 < self.lr_decay <= 1.0:
            raise ValueError("lr_decay must lie in (0, 1]")
        if self.loss_kind not in LOSS_KINDS:
            raise ValueError(f"loss_kind must be one of {LOSS_KINDS}")

    def to_dict(self):
        d = asdict(self)
        d["betas"] = list(self.betas)
        return d

    @classmethod
    def from_dict(cls, data):
        known = {f.name for f in fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise ValueError(f"unknown train keys: {sorted(unknown)}")
        return cls(**data)


@dataclass
class EpochRecord:
    epoch: int
    lr: float
    train_loss: float
    val_mpjpe: float
    seconds: float

    def line(self):
        val = "nan" if self.val_mpjpe is None else f"{self.val_mpjpe:.6f}"
        return (f"epoch={self.epoch} lr={self.lr:.6e} train_loss={self.train_loss:.6f} "
                f"val_mpjpe={val}")


@dataclass
class TrainResult:
    params: object
    config: object
    log: list
    best_epoch: int
    best_val_mpjpe: float


def batch_inputs(dataset, indices, config):
    """Model inputs for the samples ``indices``: ``(pose2d, pyramids)``.

    Temporal configs get (B, F, J, 2) windows centered on each sample.
    """
    idx = np.asarray(indices)
    if config.frames > 1:
        win = dataset.windows(config.frames)[idx]
        pose = dataset.det2d[win]
        flat = win.reshape(-1)
    else:
        pose = dataset.det2d[idx]
        flat = idx
    pyr = dataset.pyramid_batch(flat) if config.uses_context else None
    return pose, pyr


def forward(pose, pyramids, params, config):
    if config.frames > 1:
        return forward_temporal(pose, pyramids, params, config)
    return forward_single_frame(pose, pyramids, params, config)


def predict_dataset(dataset, params, config, batch_size=1024):
    """Root-relative predictions (N, J, 3) for every sample of ``dataset``."""
    out = np.empty((len(dataset), config.n_joints, 3))
    with nx.finite_checks(False):
        for lo in range(0, len(dataset), batch_size):
            idx = np.arange(lo, min(lo + batch_size, len(dataset)))
            pose, pyr = batch_inputs(dataset, idx, config)
            out[idx] = predict(pose, pyr, params, config)
    if not np.all(np.isfinite(out)):
        raise nx.NonFiniteError("non-finite predictions")
    return out


def train_step(params, optimizer, pose, pyramids, target, config, train_config):
    """One forward/backward/update; returns the batch loss."""
    params.zero_grad()
    with nx.finite_checks(False):
        with nx.GradientTape() as tape:
            pred = forward(pose, pyramids, params, config)
            loss = l2_loss(pred, nx.Tensor(target), train_config.loss_kind)
        value = loss.item()
        if not np.isfinite(value):
            raise NonFiniteGradientError("non-finite loss")
        nx.backward(loss, tape)
    grads = {k: t.grad for k, t in params.items() if t.grad is not None}
    for name, g in grads.items():
        if not np.all(np.isfinite(g)):
            raise NonFiniteGradientError(f"non-finite gradient for {name}")
    clip_grad_norm(grads, train_config.grad_clip)
    optimizer.step(grads)
    return value


def train(config, dataset, train_config=None, val_dataset=None, params=None, log_fn=None):
    """Fit ``config`` on ``dataset``.

    Parameters
    ----------
    config : ModelConfig
    dataset : PoseDataset
        Training frames; must carry pyramids for context variants.
    train_config : TrainConfig, optional
    val_dataset : PoseDataset, optional
        Scored after every epoch; the best epoch's parameters are returned.
        Without it the final parameters are returned.
    params : ParameterSet, optional
        Starting point; a fresh seeded initialization by default.
    log_fn : callable, optional
        Receives each epoch's log line.

    Returns
    -------
    TrainResult

    Raises
    ------
    DivergenceError
        On a non-finite loss or gradient; carries the last good parameters.
    """
    tc = TrainConfig() if train_config is None else train_config
    if len(dataset) == 0:
        raise ValueError("training set is empty")
    if config.uses_context and not dataset.has_pyramids:
        raise ValueError(f"variant {config.variant} needs a dataset with pyramids")
    params = init_params(config, tc.seed) if params is None else params
    opt = AdamW(params, tc.lr, tc.betas, tc.eps, tc.weight_decay, config.offset_lr_scale)
    rng = np.random.default_rng([tc.seed, 0x5107])
    log, best, best_state, best_epoch = [], np.inf, params.state(), -1
    n = len(dataset)
    for epoch in range(tc.epochs):
        t0 = time.perf_counter()
        opt.lr = lr_schedule(epoch, tc.lr, tc.lr_decay)
        order = rng.permutation(n)
        total, seen = 0.0, 0
        last_good = params.state()
        for lo in range(0, n, tc.batch_size):
            idx = order[lo:lo + tc.batch_size]
            pose, pyr = batch_inputs(dataset, idx, config)
            try:
                loss = train_step(params, opt, pose, pyr, dataset.gt3d[idx], config, tc)
            except NonFiniteGradientError as exc:
                params.load_state(last_good)
                raise DivergenceError(f"epoch {epoch}: {exc}", params, log) from exc
            total += loss * len(idx)
            seen += len(idx)
        val = None
        if val_dataset is not None and len(val_dataset):
            val = mpjpe(predict_dataset(val_dataset, params, config, tc.eval_batch_size),
                        val_dataset.gt3d)
        rec = EpochRecord(epoch + 1, opt.lr, total / seen, val, time.perf_counter() - t0)
        log.append(rec)
        if log_fn is not None:
            log_fn(rec.line())
        score = val if val is not None else -epoch
        if score < best:
            best, best_state, best_epoch = score, params.state(), epoch + 1
    params.load_state(best_state)
    best_val = best if val_dataset is not None and len(val_dataset) else None
    return TrainResult(params, config, log, best_epoch, best_val)

"""Loss, optimizer, schedule, training loop, checkpoints and FLOP accounting."""
from .checkpoint import read_checkpoint, write_checkpoint
from .flops import count_flops, flop_breakdown
from .loop import (
    DivergenceError, EpochRecord, TrainConfig, TrainResult, batch_inputs, predict_dataset,
    train, train_step,
)
from .loss import LOSS_KINDS, l2_loss
from .optim import (
    BASE_LR, LR_DECAY, AdamW, NonFiniteGradientError, clip_grad_norm, lr_schedule,
    param_groups,
)

__all__ = [
    "AdamW", "BASE_LR", "DivergenceError", "EpochRecord", "LOSS_KINDS", "LR_DECAY",
    "NonFiniteGradientError", "TrainConfig", "TrainResult", "batch_inputs", "clip_grad_norm",
    "count_flops", "flop_breakdown", "l2_loss", "lr_schedule", "param_groups",
    "predict_dataset", "read_checkpoint", "train", "train_step", "write_checkpoint",
]

"""Lifting network, its ablation ladder and the temporal extension."""
from .config import VARIANTS, ConfigError, ModelConfig, desk_config
from .network import (
    MissingPyramidError, deformable_attention, deformable_context_layer, embed_pose,
    forward_single_frame, forward_temporal, fuse_pose_context, init_context_tokens,
    inter_joint_encode, joint_features, predict, regress_head, self_attention,
    transformer_block,
)
from .params import ParameterSet, init_params, is_embedding, is_offset_param, offset_bias

__all__ = [
    "ConfigError", "MissingPyramidError", "ModelConfig", "ParameterSet", "VARIANTS",
    "deformable_attention", "deformable_context_layer", "desk_config", "embed_pose",
    "forward_single_frame", "forward_temporal", "fuse_pose_context", "init_context_tokens",
    "init_params", "inter_joint_encode", "is_embedding", "is_offset_param", "joint_features",
    "offset_bias", "predict", "regress_head", "self_attention", "transformer_block",
]

"""Analytic multiply-add count of the lifting network for one output pose.

Counting convention (one multiply-add counts as one FLOP):

* linear map ``din -> dout`` on one token: ``din * dout`` (biases ignored);
* attention over ``T`` tokens of width ``d``: ``T*T*d`` for scores plus
  ``T*T*d`` for the weighted sum of values;
* bilinear sampling: 8 per sampled channel (4 corner weights, 4 blends);
* deformable weighting: 1 per sampled channel and point;
* normalization, softmax, GELU and residual additions are not counted.

A temporal model runs the single-frame trunk once per frame in its window.
"""
from collections import OrderedDict

SAMPLE_COST = 8


def _block(tokens, width, ratio):
    """One pre-norm transformer layer over ``tokens`` tokens of ``width``."""
    qkv = tokens * width * 3 * width
    attn = 2 * tokens * tokens * width
    proj = tokens * width * width
    mlp = 2 * tokens * width * ratio * width
    return qkv + attn + proj + mlp


def flop_breakdown(config):
    """Per-component counts (ordered dict); see the module docstring."""
    j, c, r = config.n_joints, config.dim, config.mlp_ratio
    levels = config.levels
    parts = OrderedDict()
    parts["embed"] = j * 2 * c
    if config.uses_context:
        parts["context_init"] = sum(j * (SAMPLE_COST * config.level_channels[l]
                                         + config.level_channels[l] * c) for l in levels)
    if config.variant == "step3":
        m, k = config.deform_heads, config.deform_points
        per_layer = 0
        for l in levels:
            cl = config.level_channels[l]
            per_layer += j * (c * m * k * 2 + c * m * k)  # offset and weight heads
            per_layer += j * m * k * cl * (SAMPLE_COST + 1)  # sampling and weighting
            per_layer += j * m * cl * (c // m)  # per-head value projection
            per_layer += j * (c * c + 2 * c * r * c)  # output projection and MLP
        parts["deformable"] = config.n_deform_layers * per_layer
    if config.variant in ("step2", "step3"):
        parts["fusion"] = config.n_fusion_layers * j * _block(config.tokens_per_joint, c, r)
    d = config.joint_dim
    parts["inter_joint"] = config.n_joint_layers * _block(j, d, r)
    f = config.frames
    if f > 1:
        for key in list(parts):
            parts[key] *= f
        parts["temporal"] = config.n_temporal_layers * j * _block(f, d, r) + j * f * d
    parts["head"] = j * d * 3
    return parts


def count_flops(config):
    """Total multiply-adds for one output pose under ``config``."""
    return int(sum(flop_breakdown(config).values()))

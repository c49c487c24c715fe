"""Forward passes of the lifting network.

All functions are batched: 2D poses are (B, J, 2) arrays or tensors in
normalized image units, pyramids are :class:`~ctxlift.data.PyramidBatch`
objects, and outputs are tensors whose leading axis is the batch.

``trace``, when given, is a list that collects ``(name, probabilities)`` for
every attention softmax so callers can inspect row normalization.
"""
import math

import numpy as np

from .. import numerics as nx
from ..numerics import Tensor, as_tensor


class MissingPyramidError(ValueError):
    """A context-aware variant was run without feature maps."""


def _record(trace, name, probs):
    if trace is not None:
        trace.append((name, probs.data))


def _mlp_residual(x, ps, prefix):
    h = nx.layer_norm(x, ps[f"{prefix}.norm2.g"], ps[f"{prefix}.norm2.b"])
    return x + nx.mlp_block(h, ps[f"{prefix}.fc1.w"], ps[f"{prefix}.fc1.b"],
                            ps[f"{prefix}.fc2.w"], ps[f"{prefix}.fc2.b"])


def self_attention(x, ps, prefix, heads, trace=None):
    """Multi-head self-attention over axis -2 of ``x`` (..., T, D)."""
    lead, (t, d) = x.shape[:-2], x.shape[-2:]
    n = int(np.prod(lead, dtype=np.int64)) if lead else 1
    dh = d // heads
    qkv = nx.linear(x, ps[f"{prefix}.qkv.w"], ps[f"{prefix}.qkv.b"])
    qkv = nx.transpose(qkv.reshape(n, t, 3, heads, dh), (2, 0, 3, 1, 4))
    q, k, v = qkv[0], qkv[1], qkv[2]
    scores = nx.matmul(q, nx.swapaxes(k, -1, -2)) * (1.0 / math.sqrt(dh))
    probs = nx.softmax(scores, axis=-1)
    _record(trace, prefix, probs)
    ctx = nx.transpose(nx.matmul(probs, v), (0, 2, 1, 3)).reshape(lead + (t, d))
    return nx.linear(ctx, ps[f"{prefix}.proj.w"], ps[f"{prefix}.proj.b"])


def transformer_block(x, ps, prefix, heads, trace=None):
    """Pre-norm encoder layer: attention residual, then MLP residual."""
    h = nx.layer_norm(x, ps[f"{prefix}.norm1.g"], ps[f"{prefix}.norm1.b"])
    x = x + self_attention(h, ps, prefix, heads, trace)
    return _mlp_residual(x, ps, prefix)


def embed_pose(pose2d, ps):
    """Shared per-joint linear map 2 -> C. Returns (B, J, C)."""
    return nx.linear(as_tensor(pose2d), ps["embed.w"], ps["embed.b"])


def _check_pyramids(config, pyramids):
    if pyramids is None:
        raise MissingPyramidError(f"variant {config.variant} needs feature pyramids")
    if len(pyramids.levels) != config.n_levels:
        raise MissingPyramidError(
            f"expected {config.n_levels} pyramid levels, got {len(pyramids.levels)}")


def init_context_tokens(pose2d, pyramids, ps, config):
    """Sample each active level at the detected joints and project to C.

    Returns (B, J, L_active, C).
    """
    _check_pyramids(config, pyramids)
    p = as_tensor(pose2d)
    tokens = []
    for l in config.levels:
        sampled = nx.bilinear_sample(pyramids.levels[l], p)
        tokens.append(nx.linear(sampled, ps[f"ctx.{l}.w"], ps[f"ctx.{l}.b"]))
    return nx.stack(tokens, axis=2)


def deformable_attention(query, pose2d, grid, ps, prefix, level, config, trace=None):
    """Deformable attention of one level for all joints.

    ``query`` is (B, J, C); returns (B, J, C): per head, K offset samples of
    ``grid`` around each joint are softmax-weighted, projected C_l -> C/M,
    concatenated over heads and projected C -> C.
    """
    b, j, c = query.shape
    m, k = config.deform_heads, config.deform_points
    offsets = nx.linear(query, ps[f"{prefix}.offset.{level}.w"], ps[f"{prefix}.offset.{level}.b"])
    points = as_tensor(pose2d).reshape(b, j, 1, 1, 2) + offsets.reshape(b, j, m, k, 2)
    samples = nx.bilinear_sample(grid, points)  # (B, J, M, K, C_l)
    logits = nx.linear(query, ps[f"{prefix}.attn.{level}.w"], ps[f"{prefix}.attn.{level}.b"])
    weights = nx.softmax(logits.reshape(b, j, m, k), axis=-1)
    _record(trace, f"{prefix}.attn.{level}", weights)
    mixed = nx.matmul(weights.reshape(b * j, m, 1, k), samples.reshape(b * j, m, k, -1))
    per_head = nx.transpose(mixed.reshape(b * j, m, -1), (1, 0, 2))  # (M, BJ, C_l)
    values = nx.matmul(per_head, ps[f"{prefix}.value.{level}.w"])  # (M, BJ, C/M)
    heads = nx.transpose(values, (1, 0, 2)).reshape(b, j, c)
    return nx.linear(heads, ps[f"{prefix}.out.w"], ps[f"{prefix}.out.b"])


def deformable_context_layer(tokens, pose_embed, pose2d, pyramids, ps, n, config, trace=None):
    """One deformable context extraction layer over (B, J, L, C) context tokens."""
    prefix = f"deform.{n}"
    out = []
    for i, l in enumerate(config.levels):
        f_prev = tokens[:, :, i, :]
        q = nx.layer_norm(f_prev + pose_embed, ps[f"{prefix}.norm_q.g"], ps[f"{prefix}.norm_q.b"])
        f_mid = f_prev + deformable_attention(q, pose2d, pyramids.levels[l], ps, prefix, l,
                                              config, trace)
        out.append(_mlp_residual(f_mid, ps, prefix))
    return nx.stack(out, axis=2)


def fuse_pose_context(pose_embed, context, ps, config, trace=None):
    """Per-joint transformer over [pose token, L context tokens] (+ E_uni).

    Returns joint tokens (B, J, L+1, C).
    """
    b, j, c = pose_embed.shape
    x = nx.concat([pose_embed.reshape(b, j, 1, c), context], axis=2)
    x = x + nx.transpose(ps["e_uni"], (1, 0, 2))
    for n in range(config.n_fusion_layers):
        x = transformer_block(x, ps, f"fusion.{n}", config.attention_heads, trace)
    return x


def inter_joint_encode(tokens, ps, config, trace=None):
    """Flatten per-joint tokens, add E_spa, run the spatial encoder. (B, J, D)."""
    b, j = tokens.shape[:2]
    z = tokens.reshape(b, j, -1) + ps["e_spa"]
    for n in range(config.n_joint_layers):
        z = transformer_block(z, ps, f"joint.{n}", config.attention_heads, trace)
    return z


def regress_head(z, ps, config):
    """Shared per-joint LayerNorm + linear D -> 3, scaled to millimeters."""
    h = nx.layer_norm(z, ps["head.norm.g"], ps["head.norm.b"])
    return nx.linear(h, ps["head.w"], ps["head.b"]) * config.output_scale


def joint_features(pose2d, pyramids, ps, config, trace=None):
    """Single-frame trunk up to (and including) inter-joint modeling."""
    pose2d = as_tensor(pose2d)
    p_embed = embed_pose(pose2d, ps)
    b, j, c = p_embed.shape
    if config.variant == "step0":
        tokens = p_embed.reshape(b, j, 1, c)
    else:
        context = init_context_tokens(pose2d, pyramids, ps, config)
        if config.variant == "step3":
            for n in range(config.n_deform_layers):
                context = deformable_context_layer(context, p_embed, pose2d, pyramids, ps, n,
                                                   config, trace)
        if config.variant == "step1":
            tokens = nx.concat([p_embed.reshape(b, j, 1, c), context], axis=2)
        else:
            tokens = fuse_pose_context(p_embed, context, ps, config, trace)
    return inter_joint_encode(tokens, ps, config, trace)


def forward_single_frame(pose2d, pyramids, ps, config, trace=None):
    """(B, J, 2) detections (+ pyramids) -> (B, J, 3) root-relative mm."""
    return regress_head(joint_features(pose2d, pyramids, ps, config, trace), ps, config)


def forward_temporal(pose2d_seq, pyramids, ps, config, trace=None):
    """Central-frame prediction from a window of ``config.frames`` frames.

    ``pose2d_seq`` is (B, F, J, 2); ``pyramids`` is one PyramidBatch covering
    the B*F frames in (batch, frame) order.
    """
    pose2d_seq = as_tensor(pose2d_seq)
    if pose2d_seq.ndim != 4 or pose2d_seq.shape[1] != config.frames:
        raise ValueError(f"expected (B, {config.frames}, J, 2) input, got {pose2d_seq.shape}")
    b, f, j, _ = pose2d_seq.shape
    flat = pose2d_seq.reshape(b * f, j, 2)
    z = joint_features(flat, pyramids, ps, config, trace)  # (B*F, J, D)
    d = z.shape[-1]
    if f == 1 and "e_temp" not in ps:
        return regress_head(z, ps, config)
    z = nx.transpose(z.reshape(b, f, j, d), (0, 2, 1, 3)) + ps["e_temp"]  # (B, J, F, D)
    for n in range(config.n_temporal_layers):
        z = transformer_block(z, ps, f"temporal.{n}", config.attention_heads, trace)
    reduced = nx.tsum(z * ps["temporal.reduce.w"], axis=2) + ps["temporal.reduce.b"]
    return regress_head(reduced, ps, config)


def predict(pose2d, pyramids, ps, config):
    """Forward pass without recording; returns a numpy array."""
    with nx.no_grad():
        if config.frames > 1:
            return forward_temporal(pose2d, pyramids, ps, config).data
        return forward_single_frame(pose2d, pyramids, ps, config).data


def param_count(ps):
    return ps.count()


__all__ = [
    "MissingPyramidError", "Tensor", "deformable_attention", "deformable_context_layer",
    "embed_pose", "forward_single_frame", "forward_temporal", "fuse_pose_context",
    "init_context_tokens", "inter_joint_encode", "joint_features", "param_count", "predict",
    "regress_head", "self_attention", "transformer_block",
]

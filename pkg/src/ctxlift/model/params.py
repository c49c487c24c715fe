"""Named parameter tensors and their initialization."""
import math
from collections import OrderedDict

import numpy as np

from ..numerics import Tensor

EMBEDDING_NAMES = ("e_spa", "e_uni", "e_temp")


class ParameterSet:
    """Ordered mapping of parameter name -> Tensor (every slot unique)."""

    def __init__(self, tensors=None):
        self._tensors = OrderedDict()
        for name, value in (tensors or {}).items():
            self.add(name, value)

    def add(self, name, value):
        if name in self._tensors:
            raise KeyError(f"duplicate parameter {name!r}")
        t = value if isinstance(value, Tensor) else Tensor(value)
        t.requires_grad = True
        t.name = name
        self._tensors[name] = t
        return t

    def __getitem__(self, name):
        return self._tensors[name]

    def __contains__(self, name):
        return name in self._tensors

    def __iter__(self):
        return iter(self._tensors)

    def __len__(self):
        return len(self._tensors)

    def items(self):
        return self._tensors.items()

    def values(self):
        return self._tensors.values()

    def names(self):
        return list(self._tensors)

    def count(self):
        return int(sum(t.size for t in self._tensors.values()))

    def zero_grad(self):
        for t in self._tensors.values():
            t.grad = None

    def copy(self):
        return ParameterSet({k: Tensor(v.data.copy()) for k, v in self._tensors.items()})

    def state(self):
        return OrderedDict((k, v.data.copy()) for k, v in self._tensors.items())

    def load_state(self, state):
        if set(state) != set(self._tensors):
            missing = set(self._tensors) - set(state)
            extra = set(state) - set(self._tensors)
            raise KeyError(f"parameter mismatch: missing {sorted(missing)}, extra {sorted(extra)}")
        for k, arr in state.items():
            if arr.shape != self._tensors[k].shape:
                raise ValueError(f"{k}: shape {arr.shape} != {self._tensors[k].shape}")
            self._tensors[k].data = np.array(arr, dtype=np.float64)


def is_offset_param(name):
    """Offset-generating layers train at a reduced learning rate."""
    return ".offset." in name


def is_embedding(name):
    return name in EMBEDDING_NAMES


def _dense(rng, fan_in, fan_out):
    std = math.sqrt(2.0 / (fan_in + fan_out))
    return rng.normal(0.0, std, size=(fan_in, fan_out))


def _block(ps, prefix, dim, ratio, rng):
    ps.add(f"{prefix}.norm1.g", np.ones(dim))
    ps.add(f"{prefix}.norm1.b", np.zeros(dim))
    ps.add(f"{prefix}.qkv.w", _dense(rng, dim, 3 * dim))
    ps.add(f"{prefix}.qkv.b", np.zeros(3 * dim))
    ps.add(f"{prefix}.proj.w", _dense(rng, dim, dim))
    ps.add(f"{prefix}.proj.b", np.zeros(dim))
    _mlp(ps, prefix, dim, ratio, rng)


def _mlp(ps, prefix, dim, ratio, rng):
    ps.add(f"{prefix}.norm2.g", np.ones(dim))
    ps.add(f"{prefix}.norm2.b", np.zeros(dim))
    ps.add(f"{prefix}.fc1.w", _dense(rng, dim, ratio * dim))
    ps.add(f"{prefix}.fc1.b", np.zeros(ratio * dim))
    ps.add(f"{prefix}.fc2.w", _dense(rng, ratio * dim, dim))
    ps.add(f"{prefix}.fc2.b", np.zeros(dim))


def offset_bias(heads, points):
    """Initial offsets: head m points in direction 2*pi*m/M, point k at
    radius 0.05*(k+1)/K (normalized image units). Shape (M*K*2,)."""
    bias = np.zeros((heads, points, 2))
    for m in range(heads):
        angle = 2.0 * math.pi * m / heads
        for k in range(points):
            r = 0.05 * (k + 1) / points
            bias[m, k] = (r * math.cos(angle), r * math.sin(angle))
    return bias.reshape(-1)


def init_params(config, seed=0):
    """Fresh ParameterSet for ``config``; positional embeddings and the regression
    head start at zero."""
    rng = np.random.default_rng([seed, 0x5EED])
    c, j, ratio = config.dim, config.n_joints, config.mlp_ratio
    ps = ParameterSet()
    ps.add("embed.w", _dense(rng, 2, c))
    ps.add("embed.b", np.zeros(c))

    levels = config.levels
    for l in levels:
        ps.add(f"ctx.{l}.w", _dense(rng, config.level_channels[l], c))
        ps.add(f"ctx.{l}.b", np.zeros(c))

    if config.variant == "step3":
        m, k = config.deform_heads, config.deform_points
        for n in range(config.n_deform_layers):
            pre = f"deform.{n}"
            ps.add(f"{pre}.norm_q.g", np.ones(c))
            ps.add(f"{pre}.norm_q.b", np.zeros(c))
            for l in levels:
                ps.add(f"{pre}.offset.{l}.w", np.zeros((c, m * k * 2)))
                ps.add(f"{pre}.offset.{l}.b", offset_bias(m, k))
                ps.add(f"{pre}.attn.{l}.w", np.zeros((c, m * k)))
                ps.add(f"{pre}.attn.{l}.b", np.zeros(m * k))
                cl = config.level_channels[l]
                ps.add(f"{pre}.value.{l}.w",
                       rng.normal(0.0, math.sqrt(2.0 / (cl + c // m)), size=(m, cl, c // m)))
            ps.add(f"{pre}.out.w", _dense(rng, c, c))
            ps.add(f"{pre}.out.b", np.zeros(c))
            _mlp(ps, pre, c, ratio, rng)

    if config.variant in ("step2", "step3"):
        ps.add("e_uni", np.zeros((config.tokens_per_joint, j, c)))
        for n in range(config.n_fusion_layers):
            _block(ps, f"fusion.{n}", c, ratio, rng)

    d = config.joint_dim
    ps.add("e_spa", np.zeros((j, d)))
    for n in range(config.n_joint_layers):
        _block(ps, f"joint.{n}", d, ratio, rng)

    if config.frames > 1:
        ps.add("e_temp", np.zeros((config.frames, d)))
        for n in range(config.n_temporal_layers):
            _block(ps, f"temporal.{n}", d, ratio, rng)
            # Zero residual branches: the temporal path starts as the identity.
            ps[f"temporal.{n}.proj.w"].data[:] = 0.0
            ps[f"temporal.{n}.fc2.w"].data[:] = 0.0
        reduce_w = np.zeros((config.frames, d))
        reduce_w[config.frames // 2] = 1.0
        ps.add("temporal.reduce.w", reduce_w)
        ps.add("temporal.reduce.b", np.zeros(d))

    ps.add("head.norm.g", np.ones(d))
    ps.add("head.norm.b", np.zeros(d))
    # Zero head: training starts from the all-joints-at-root prediction.
    ps.add("head.w", np.zeros((d, 3)))
    ps.add("head.b", np.zeros(3))
    return ps

"""Built-in property suites: gradients, reduction identity, metric oracles.

Each suite returns a list of :class:`Check` results; :func:`run_selftest`
runs them all. Everything is seeded, so a correct build always passes.
"""
import itertools
import math
import time
from dataclasses import dataclass

import numpy as np

from . import numerics as nx
from .metrics import auc, mpjpe, mpjve, pa_mpjpe, pck, procrustes_align
from .model import ModelConfig, deformable_attention, forward_single_frame, init_params
from .data.pyramid import PyramidBatch
from .numerics import ArrayGrid, Tensor
from .training.loss import l2_loss

GRAD_TOL = 1e-4
GRAD_H = 1e-5


@dataclass
class Check:
    suite: str
    name: str
    passed: bool
    value: float
    limit: float

    def line(self):
        status = "PASS" if self.passed else "FAIL"
        return f"{status} {self.suite}/{self.name}: {self.value:.3e} (limit {self.limit:.0e})"


def _leaf(rng, shape, lo=-1.0, hi=1.0):
    return Tensor(rng.uniform(lo, hi, size=shape), requires_grad=True)


def _off_grid(rng, shape, extents, margin=1e-3):
    """Points in [0,1]^2 kept ``margin`` (in cells) away from grid lines."""
    pts = rng.uniform(0.02, 0.98, size=shape + (2,))
    for axis, n in enumerate(extents):
        cells = pts[..., axis] * (n - 1)
        frac = cells - np.floor(cells)
        frac = np.clip(frac, margin, 1.0 - margin)
        pts[..., axis] = (np.floor(cells) + frac) / (n - 1)
    return pts


def _op_cases(rng):
    """(name, f, params) triples for one random configuration."""
    n, m, k = rng.integers(2, 5, size=3)
    a, b = _leaf(rng, (n, m)), _leaf(rng, (n, m))
    pos = _leaf(rng, (n, m), 0.5, 2.0)
    col = _leaf(rng, (m,))
    left, right = _leaf(rng, (n, k)), _leaf(rng, (k, m))
    batched = _leaf(rng, (2, n, k))
    w, bias = _leaf(rng, (m, k)), _leaf(rng, (k,))
    gain = _leaf(rng, (m,), 0.5, 1.5)
    w2, b2 = _leaf(rng, (k, m)), _leaf(rng, (m,))
    weights = Tensor(rng.normal(size=(n, m)))
    h, wd, c = int(rng.integers(2, 6)), int(rng.integers(2, 6)), int(rng.integers(1, 4))
    fmap = _leaf(rng, (h, wd, c))
    pts = Tensor(_off_grid(rng, (n,), (wd, h)), requires_grad=True)
    outside = Tensor(_off_grid(rng, (n,), (wd, h)) * 1.4 - 0.2, requires_grad=True)
    idx = rng.integers(0, n, size=n + 1)
    target = Tensor(rng.normal(size=(n, m, 3)))
    pred = _leaf(rng, (n, m, 3))

    def wsum(t):
        return nx.tsum(t * weights)

    return [
        ("add", lambda p: wsum(p[0] + p[1]), [a, b]),
        ("add_broadcast", lambda p: wsum(p[0] + p[1]), [a, col]),
        ("sub", lambda p: wsum(p[0] - p[1]), [a, col]),
        ("mul", lambda p: wsum(p[0] * p[1]), [a, b]),
        ("div", lambda p: wsum(p[0] / p[1]), [a, pos]),
        ("neg", lambda p: wsum(-p[0]), [a]),
        ("exp", lambda p: wsum(nx.exp(p[0])), [a]),
        ("log", lambda p: wsum(nx.log(p[0])), [pos]),
        ("square", lambda p: wsum(nx.square(p[0])), [a]),
        ("matmul", lambda p: wsum(nx.matmul(p[0], p[1])), [left, right]),
        ("matmul_batched", lambda p: nx.tsum(nx.matmul(p[0], p[1]) * 0.5), [batched, right]),
        ("linear", lambda p: nx.tsum(nx.square(nx.linear(p[0], p[1], p[2]))), [a, w, bias]),
        ("sum_axis", lambda p: nx.tsum(nx.square(nx.tsum(p[0], axis=0))), [a]),
        ("mean", lambda p: nx.tsum(nx.square(nx.mean(p[0], axis=1))), [a]),
        ("reshape", lambda p: wsum(nx.reshape(p[0], (m, n)).transpose().reshape((n, m))), [a]),
        ("transpose", lambda p: nx.tsum(nx.transpose(p[0]) * weights.transpose()), [a]),
        ("getitem", lambda p: nx.tsum(nx.square(p[0][idx])), [a]),
        ("concat", lambda p: nx.tsum(nx.square(nx.concat([p[0], p[1]], axis=1))), [a, b]),
        ("stack", lambda p: nx.tsum(nx.square(nx.stack([p[0], p[1]], axis=0))), [a, b]),
        ("softmax", lambda p: wsum(nx.softmax(p[0], axis=-1)), [a]),
        ("log_softmax", lambda p: wsum(nx.log_softmax(p[0], axis=-1)), [a]),
        ("layer_norm", lambda p: wsum(nx.layer_norm(p[0], p[1], p[2])), [a, gain, col]),
        ("gelu", lambda p: wsum(nx.gelu(p[0])), [a]),
        ("norm", lambda p: nx.tsum(nx.norm(p[0], axis=-1)), [a]),
        ("clip", lambda p: wsum(nx.clip(p[0], -0.5, 0.5)), [a]),
        ("mlp_block", lambda p: wsum(nx.mlp_block(p[0], p[1], p[2], p[3], p[4])),
         [a, w, bias, w2, b2]),
        ("bilinear_sample", lambda p: nx.tsum(nx.square(nx.bilinear_sample(p[0], p[1]))),
         [fmap, pts]),
        ("bilinear_sample_clamped",
         lambda p: nx.tsum(nx.square(nx.bilinear_sample(p[0], p[1]))), [fmap, outside]),
        ("loss_euclidean", lambda p: l2_loss(p[0], target, "euclidean"), [pred]),
        ("loss_squared", lambda p: l2_loss(p[0], target, "squared"), [pred]),
    ]


def _clip_safe(case_params, name):
    # Keep clip inputs away from the kinks at +-0.5.
    if name == "clip":
        d = case_params[0].data
        d[np.abs(np.abs(d) - 0.5) < 1e-3] += 3e-3


def tiny_model(variant="step3", seed=0, frames=1):
    """Small random step-``variant`` model, pyramid, poses and targets."""
    rng = np.random.default_rng([seed, 0x71A7])
    config = ModelConfig(n_joints=3, n_levels=2, dim=4, n_deform_layers=1, n_fusion_layers=1,
                         n_joint_layers=1, attention_heads=2, deform_heads=2, deform_points=2,
                         variant=variant, frames=frames, n_temporal_layers=1,
                         active_levels=(True, True), level_channels=(3, 3), output_scale=1.0)
    ps = init_params(config, seed)
    for t in ps.values():
        t.data = t.data + rng.normal(0.0, 0.1, size=t.shape)
    b = 2 * frames
    maps = [ArrayGrid(rng.normal(size=(b, 5, 4, 3))), ArrayGrid(rng.normal(size=(b, 3, 3, 3)))]
    pyr = PyramidBatch(maps, (4, 8))
    pose = rng.uniform(0.25, 0.75, size=(2, frames, 3, 2) if frames > 1 else (2, 3, 2))
    target = rng.normal(size=(2, 3, 3))
    return config, ps, pyr, pose, target


def gradient_suite(n_configs=20, seed=0):
    """Finite-difference checks of every primitive and of full model losses."""
    checks = []
    for cfg in range(n_configs):
        rng = np.random.default_rng([seed, cfg])
        worst = {}
        for name, f, params in _op_cases(rng):
            _clip_safe(params, name)
            rep = nx.finite_diff_check(f, params, h=GRAD_H, n_samples=6, rng=rng)
            worst[name] = max(worst.get(name, 0.0), rep.max_rel_error)
        for name, err in worst.items():
            checks.append(Check("gradient", f"{name}[{cfg}]", err < GRAD_TOL, err, GRAD_TOL))
        config, ps, pyr, pose, target = tiny_model("step3", seed=cfg)
        names = ps.names()
        tensors = [ps[k] for k in names]

        def loss(_params, config=config, ps=ps, pyr=pyr, pose=pose, target=target):
            return l2_loss(forward_single_frame(pose, pyr, ps, config), Tensor(target))

        rep = nx.finite_diff_check(loss, tensors, h=GRAD_H, n_samples=2, rng=rng)
        checks.append(Check("gradient", f"step3_loss[{cfg}]", rep.max_rel_error < GRAD_TOL,
                            rep.max_rel_error, GRAD_TOL))
    return checks


def reduction_suite(n_configs=5, seed=0, tol=1e-10):
    """Deformable attention with M=K=1, zero offsets and identity projections
    equals direct bilinear sampling at the joints."""
    checks = []
    for cfg in range(n_configs):
        rng = np.random.default_rng([seed, 100 + cfg])
        b, j, c = 2, int(rng.integers(2, 6)), int(rng.integers(2, 6))
        config = ModelConfig(n_joints=j, n_levels=1, dim=c, n_deform_layers=1,
                             attention_heads=1, deform_heads=1, deform_points=1,
                             active_levels=(True,), level_channels=(c,))
        grid = ArrayGrid(rng.normal(size=(b, 7, 5, c)))
        pose = rng.uniform(-0.1, 1.1, size=(b, j, 2))
        ps = {
            "d.offset.0.w": Tensor(np.zeros((c, 2))), "d.offset.0.b": Tensor(np.zeros(2)),
            "d.attn.0.w": Tensor(rng.normal(size=(c, 1))), "d.attn.0.b": Tensor(np.zeros(1)),
            "d.value.0.w": Tensor(np.eye(c)[None]), "d.out.w": Tensor(np.eye(c)),
            "d.out.b": Tensor(np.zeros(c)),
        }
        query = Tensor(rng.normal(size=(b, j, c)))
        out = deformable_attention(query, pose, grid, ps, "d", 0, config).data
        direct = grid.interpolate(np.repeat(np.arange(b), j), pose.reshape(-1, 2), False)[0]
        err = float(np.max(np.abs(out - direct.reshape(b, j, c))))
        checks.append(Check("reduction", f"identity[{cfg}]", err <= tol, err, tol))
    return checks


def _scalar_mpjpe(p, g):
    total = 0.0
    for i in range(p.shape[0]):
        for j in range(p.shape[1]):
            total += math.sqrt(sum((p[i, j, a] - g[i, j, a]) ** 2 for a in range(3)))
    return total / (p.shape[0] * p.shape[1])


def _scalar_mpjve(p, g):
    total, count = 0.0, 0
    for t in range(1, p.shape[0]):
        for j in range(p.shape[1]):
            sq = 0.0
            for a in range(3):
                d = (p[t, j, a] - p[t - 1, j, a]) - (g[t, j, a] - g[t - 1, j, a])
                sq += d * d
            total += math.sqrt(sq)
            count += 1
    return total / count


def _scalar_pck(p, g, thr):
    hits = 0
    for i, j in itertools.product(range(p.shape[0]), range(p.shape[1])):
        if math.sqrt(sum((p[i, j, a] - g[i, j, a]) ** 2 for a in range(3))) < thr:
            hits += 1
    return 100.0 * hits / (p.shape[0] * p.shape[1])


def _random_rotation(rng):
    q, r = np.linalg.qr(rng.normal(size=(3, 3)))
    q = q * np.sign(np.diag(r))
    if np.linalg.det(q) < 0:
        q[:, 0] = -q[:, 0]
    return q


def metric_suite(seed=0, n_pairs=1000):
    """Metric oracles: similarity invariance, PA <= MPJPE, scalar loops,
    rotation validity."""
    rng = np.random.default_rng([seed, 0xE7A1])
    checks = []
    worst_pa, worst_rot = 0.0, 0.0
    violations = 0
    rms_gap = -np.inf
    for _ in range(n_pairs):
        gt = rng.normal(0.0, 200.0, size=(17, 3))
        pred = gt + rng.normal(0.0, 40.0, size=(17, 3))
        rot = _random_rotation(rng)
        moved = rng.uniform(0.5, 2.0) * gt @ rot.T + rng.normal(0.0, 500.0, size=3)
        worst_pa = max(worst_pa, pa_mpjpe(moved, gt))
        other = rng.normal(0.0, 200.0, size=(17, 3))
        if pa_mpjpe(other, gt) > mpjpe(other, gt) + 1e-9:
            violations += 1
        # Alignment minimizes the summed squared error, so RMS can only drop.
        aligned = procrustes_align(pred, gt)
        rms_gap = max(rms_gap, np.sqrt(((aligned - gt) ** 2).mean())
                      - np.sqrt(((pred - gt) ** 2).mean()))
        _, (r, _, _) = procrustes_align(pred, gt, return_transform=True)
        worst_rot = max(worst_rot, float(np.max(np.abs(r.T @ r - np.eye(3)))),
                        abs(float(np.linalg.det(r)) - 1.0))
    checks.append(Check("metrics", "pa_similarity_invariance", worst_pa < 1e-8, worst_pa, 1e-8))
    checks.append(Check("metrics", "pa_le_mpjpe", violations == 0, float(violations), 0.0))
    checks.append(Check("metrics", "pa_rms_le_rms", rms_gap <= 1e-9, max(rms_gap, 0.0), 1e-9))
    checks.append(Check("metrics", "rotation_orthonormal", worst_rot <= 1e-10, worst_rot, 1e-10))

    p = rng.normal(0.0, 100.0, size=(8, 17, 3))
    g = rng.normal(0.0, 100.0, size=(8, 17, 3))
    errs = {
        "mpjpe_oracle": abs(mpjpe(p, g) - _scalar_mpjpe(p, g)),
        "pck_oracle": abs(pck(p, g) - _scalar_pck(p, g, 150.0)),
        "auc_oracle": abs(auc(p, g) - sum(_scalar_pck(p, g, t) for t in range(5, 151, 5)) / 30),
    }
    seq_p, seq_g = p[:5], g[:5]
    errs["mpjve_oracle"] = abs(mpjve(seq_p, seq_g) - _scalar_mpjve(seq_p, seq_g))
    for name, err in errs.items():
        checks.append(Check("metrics", name, err <= 1e-12, err, 1e-12))
    return checks


SUITES = {"gradient": gradient_suite, "reduction": reduction_suite, "metrics": metric_suite}


def run_selftest(suites=None, out=None):
    """Run the named suites (all by default); returns (all_passed, checks)."""
    checks = []
    for name in suites or SUITES:
        t0 = time.perf_counter()
        results = SUITES[name]()
        if out is not None:
            for c in results:
                if not c.passed:
                    out(c.line())
            ok = sum(c.passed for c in results)
            out(f"suite {name}: {ok}/{len(results)} passed "
                f"({time.perf_counter() - t0:.1f}s)")
        checks.extend(results)
    return all(c.passed for c in checks), checks

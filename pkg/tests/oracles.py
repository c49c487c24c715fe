"""Independent reference implementations used as test oracles.

Deliberately naive: explicit loops over scalars, no shared code with the
package under test.
"""
import itertools
import math

import numpy as np


def matmul_loops(a, b):
    n, k = a.shape
    k2, m = b.shape
    assert k == k2
    out = np.zeros((n, m))
    for i in range(n):
        for j in range(m):
            s = 0.0
            for t in range(k):
                s += a[i, t] * b[t, j]
            out[i, j] = s
    return out


def bilinear_scalar(fmap, u, v):
    """Align-corners bilinear lookup with border clamping, one point."""
    h, w, c = fmap.shape
    x = min(max(u * (w - 1), 0.0), w - 1.0)
    y = min(max(v * (h - 1), 0.0), h - 1.0)
    x0, y0 = int(math.floor(x)), int(math.floor(y))
    x1, y1 = min(x0 + 1, w - 1), min(y0 + 1, h - 1)
    fx, fy = x - x0, y - y0
    out = np.zeros(c)
    for ch in range(c):
        out[ch] = ((1 - fx) * (1 - fy) * fmap[y0, x0, ch] + fx * (1 - fy) * fmap[y0, x1, ch]
                   + (1 - fx) * fy * fmap[y1, x0, ch] + fx * fy * fmap[y1, x1, ch])
    return out


def _dist(p, q):
    return math.sqrt(sum((p[a] - q[a]) ** 2 for a in range(3)))


def mpjpe_loops(pred, gt):
    pred = np.asarray(pred).reshape(-1, pred.shape[-2], 3)
    gt = np.asarray(gt).reshape(-1, gt.shape[-2], 3)
    total = 0.0
    for i in range(pred.shape[0]):
        for j in range(pred.shape[1]):
            total += _dist(pred[i, j], gt[i, j])
    return total / (pred.shape[0] * pred.shape[1])


def pck_loops(pred, gt, thr):
    hits, count = 0, 0
    for i, j in itertools.product(range(pred.shape[0]), range(pred.shape[1])):
        count += 1
        if _dist(pred[i, j], gt[i, j]) < thr:
            hits += 1
    return 100.0 * hits / count


def auc_loops(pred, gt):
    thresholds = [5.0 * k for k in range(1, 31)]
    return sum(pck_loops(pred, gt, t) for t in thresholds) / len(thresholds)


def mpjve_loops(pred_seq, gt_seq):
    total, count = 0.0, 0
    for t in range(1, pred_seq.shape[0]):
        for j in range(pred_seq.shape[1]):
            vp = [pred_seq[t, j, a] - pred_seq[t - 1, j, a] for a in range(3)]
            vg = [gt_seq[t, j, a] - gt_seq[t - 1, j, a] for a in range(3)]
            total += _dist(vp, vg)
            count += 1
    return total / count


def random_rotation(rng):
    q, r = np.linalg.qr(rng.normal(size=(3, 3)))
    q = q * np.sign(np.diag(r))
    if np.linalg.det(q) < 0:
        q[:, 0] = -q[:, 0]
    return q


def similarity_residual(pred, gt, rot, scale, trans):
    moved = scale * pred @ rot.T + trans
    return float(((moved - gt) ** 2).sum())


def best_random_similarity(pred, gt, rng, trials=1000):
    """Smallest squared residual over random similarity transforms, each
    with its optimal translation and scale for the sampled rotation."""
    best = np.inf
    p0 = pred - pred.mean(0)
    g0 = gt - gt.mean(0)
    for _ in range(trials):
        rot = random_rotation(rng)
        rp = p0 @ rot.T
        denom = (rp ** 2).sum()
        scale = max((rp * g0).sum() / denom, 1e-12)
        best = min(best, float(((scale * rp - g0) ** 2).sum()))
    return best


def adamw_scalar(p, grads, lr, b1=0.9, b2=0.999, eps=1e-8, wd=0.0):
    """Hand-stepped AdamW on one scalar."""
    m = v = 0.0
    for t, g in enumerate(grads, start=1):
        m = b1 * m + (1 - b1) * g
        v = b2 * v + (1 - b2) * g * g
        p = p * (1 - lr * wd)
        p = p - lr * (m / (1 - b1 ** t)) / (math.sqrt(v / (1 - b2 ** t)) + eps)
    return p

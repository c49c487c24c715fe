import json
import warnings

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from ctxlift.metrics import (
    AUC_THRESHOLDS_MM, AlignmentError, MetricsReport, auc, evaluate, joint_errors, mpjpe,
    mpjve, pa_mpjpe, pck, procrustes_align, root_center, sequence_mpjve,
)
from oracles import (
    auc_loops, best_random_similarity, mpjpe_loops, mpjve_loops, pck_loops, random_rotation,
)

seeds = st.integers(0, 2**31)


def pair(seed, n=4, j=17, noise=60.0):
    rng = np.random.default_rng(seed)
    gt = rng.normal(0, 300, size=(n, j, 3))
    return gt + rng.normal(0, noise, size=gt.shape), gt


@given(seeds)
def test_mpjpe_pck_auc_match_loop_oracles(seed):
    pred, gt = pair(seed)
    assert abs(mpjpe(pred, gt) - mpjpe_loops(pred, gt)) < 1e-12 * max(1, mpjpe(pred, gt))
    assert abs(pck(pred, gt) - pck_loops(pred, gt, 150.0)) < 1e-12
    assert abs(auc(pred, gt) - auc_loops(pred, gt)) < 1e-12


@given(seeds)
def test_mpjve_matches_loop_oracle(seed):
    pred, gt = pair(seed, n=6)
    assert abs(mpjve(pred, gt) - mpjve_loops(pred, gt)) < 1e-10


def test_auc_threshold_grid():
    assert len(AUC_THRESHOLDS_MM) == 30
    assert AUC_THRESHOLDS_MM[0] == 5.0 and AUC_THRESHOLDS_MM[-1] == 150.0


def test_pck_threshold_is_strict():
    gt = np.zeros((1, 3, 3))
    pred = gt.copy()
    pred[0, :, 0] = [149.0, 150.0, 151.0]
    assert pck(pred, gt) == pytest.approx(100.0 / 3)


def test_mpjpe_of_identical_poses_is_zero():
    _, gt = pair(0)
    assert mpjpe(gt, gt) == 0.0


def test_root_center_zeroes_root_exactly():
    _, gt = pair(1)
    c = root_center(gt)
    assert np.all(c[:, 0] == 0.0)
    np.testing.assert_allclose(c[:, 1] - c[:, 2], gt[:, 1] - gt[:, 2], atol=1e-12)


@given(seeds)
def test_pa_mpjpe_invariant_to_similarity(seed):
    rng = np.random.default_rng(seed)
    gt = rng.normal(0, 300, size=(17, 3))
    moved = rng.uniform(0.3, 3.0) * gt @ random_rotation(rng).T + rng.normal(0, 1000, 3)
    assert pa_mpjpe(moved, gt) < 1e-8


@given(seeds)
def test_procrustes_rotation_is_proper(seed):
    pred, gt = pair(seed, n=1)
    _, (rot, scale, trans) = procrustes_align(pred[0], gt[0], return_transform=True)
    np.testing.assert_allclose(rot.T @ rot, np.eye(3), atol=1e-10)
    assert abs(np.linalg.det(rot) - 1.0) < 1e-10
    assert scale > 0


@given(seeds)
def test_procrustes_transform_reproduces_aligned(seed):
    pred, gt = pair(seed, n=1)
    aligned, (rot, scale, trans) = procrustes_align(pred[0], gt[0], return_transform=True)
    np.testing.assert_allclose(scale * pred[0] @ rot.T + trans, aligned, atol=1e-9)


def test_procrustes_is_optimal_against_random_search():
    rng = np.random.default_rng(7)
    for _ in range(5):
        pred, gt = pair(int(rng.integers(1 << 30)), n=1, j=8)
        aligned = procrustes_align(pred[0], gt[0])
        closed = float(((aligned - gt[0]) ** 2).sum())
        assert closed <= best_random_similarity(pred[0], gt[0], rng, trials=400) + 1e-9


def test_procrustes_refuses_reflection():
    rng = np.random.default_rng(2)
    gt = rng.normal(size=(10, 3))
    mirrored = gt * np.array([-1.0, 1.0, 1.0])
    _, (rot, _, _) = procrustes_align(mirrored, gt, return_transform=True)
    assert np.linalg.det(rot) > 0
    assert pa_mpjpe(mirrored, gt) > 1e-3


def test_pa_mpjpe_not_above_mpjpe_on_independent_pairs():
    rng = np.random.default_rng(11)
    for _ in range(200):
        pred, gt = rng.normal(0, 300, size=(2, 17, 3))
        assert pa_mpjpe(pred, gt) <= mpjpe(pred, gt)


@given(seeds)
def test_pa_rms_error_not_above_rms(seed):
    pred, gt = pair(seed, n=1, noise=20.0)
    aligned = procrustes_align(pred[0], gt[0])
    assert ((aligned - gt[0]) ** 2).sum() <= ((pred[0] - gt[0]) ** 2).sum() + 1e-9


def test_degenerate_prediction_raises_and_is_excluded():
    pred, gt = pair(3, n=3)
    pred[1] = 5.0
    with pytest.raises(AlignmentError):
        procrustes_align(pred[1], gt[1])
    value, failures = pa_mpjpe(pred, gt, return_failures=True)
    assert failures == 1
    assert value == pytest.approx(pa_mpjpe(pred[[0, 2]], gt[[0, 2]]))
    with pytest.warns(RuntimeWarning, match="degenerate"):
        evaluate(pred, gt)


def test_shape_mismatch_rejected():
    with pytest.raises(ValueError):
        mpjpe(np.zeros((2, 17, 3)), np.zeros((2, 16, 3)))
    with pytest.raises(ValueError):
        mpjve(np.zeros((1, 17, 3)), np.zeros((1, 17, 3)))


def test_sequence_mpjve_groups_and_orders_frames():
    rng = np.random.default_rng(4)
    a_pred, a_gt = rng.normal(size=(2, 5, 4, 3))
    b_pred, b_gt = rng.normal(size=(2, 3, 4, 3))
    pred = np.concatenate([a_pred, b_pred])[::-1]
    gt = np.concatenate([a_gt, b_gt])[::-1]
    seq = np.r_[np.zeros(5), np.ones(3)][::-1]
    frame = np.r_[np.arange(5), np.arange(3)][::-1]
    expect = (mpjve_loops(a_pred, a_gt) * 4 + mpjve_loops(b_pred, b_gt) * 2) / 6
    assert sequence_mpjve(pred, gt, seq, frame) == pytest.approx(expect, abs=1e-12)


def test_report_round_trip():
    pred, gt = pair(5, n=10)
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        rep = evaluate(pred, gt, np.zeros(10), np.arange(10))
    back = MetricsReport.from_dict(json.loads(rep.to_json()))
    assert back == rep
    assert "mpjpe_mm = " in rep.to_text()
    assert rep.sample_count == 10 and rep.mpjve_mm is not None
    assert np.isfinite(joint_errors(pred, gt)).all()

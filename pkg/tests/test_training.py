import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from ctxlift import numerics as nx
from ctxlift.data import FormatError, generate_dataset, generate_sequences
from ctxlift.model import VARIANTS, ModelConfig, ParameterSet, desk_config, init_params, predict
from ctxlift.numerics import Tensor
from ctxlift.training import (
    AdamW, DivergenceError, TrainConfig, batch_inputs, clip_grad_norm, count_flops,
    flop_breakdown, l2_loss, lr_schedule, param_groups, predict_dataset, read_checkpoint, train,
    write_checkpoint,
)
from oracles import adamw_scalar


def small(variant="step3", **kw):
    base = dict(dim=8, n_deform_layers=1, n_fusion_layers=1, n_joint_layers=1,
                attention_heads=2, deform_heads=2, deform_points=2, variant=variant)
    base.update(kw)
    return ModelConfig(**base)


# --- loss -----------------------------------------------------------------------------

def test_euclidean_and_squared_losses():
    pred = np.zeros((1, 2, 3))
    gt = np.array([[[3.0, 4.0, 0.0], [0.0, 0.0, 1.0]]])
    assert l2_loss(Tensor(pred), Tensor(gt)).item() == pytest.approx(3.0)
    assert l2_loss(Tensor(pred), Tensor(gt), "squared").item() == pytest.approx(26.0 / 6)
    with pytest.raises(ValueError):
        l2_loss(Tensor(pred), Tensor(gt), "l1")


# --- optimizer ------------------------------------------------------------------------

def test_lr_schedule():
    assert lr_schedule(0) == 6.4e-3
    assert lr_schedule(10) == pytest.approx(6.4e-3 * 0.99 ** 10)
    with pytest.raises(ValueError):
        lr_schedule(-1)


@given(st.lists(st.floats(-5, 5, allow_nan=False), min_size=1, max_size=8),
       st.floats(-3, 3), st.sampled_from([0.0, 0.01, 0.1]))
def test_adamw_matches_hand_stepped_scalar(grads, p0, wd):
    ps = ParameterSet()
    ps.add("w", np.array([p0]))
    opt = AdamW(ps, lr=0.01, weight_decay=wd)
    for g in grads:
        opt.step({"w": np.array([g])})
    assert ps["w"].data[0] == pytest.approx(adamw_scalar(p0, grads, 0.01, wd=wd), abs=1e-12)


def test_parameter_groups():
    ps = init_params(small(frames=3))
    groups = param_groups(ps.names(), offset_lr_scale=0.1, weight_decay=0.05)
    assert groups["deform.0.offset.0.w"] == (0.1, 0.05)
    assert groups["e_spa"] == (1.0, 0.0) and groups["e_temp"] == (1.0, 0.0)
    assert groups["head.w"] == (1.0, 0.05)


def test_offset_params_move_ten_times_slower():
    ps = ParameterSet()
    ps.add("deform.0.offset.0.w", np.zeros(1))
    ps.add("head.w", np.zeros(1))
    opt = AdamW(ps, lr=0.01, weight_decay=0.0)
    opt.step({"deform.0.offset.0.w": np.ones(1), "head.w": np.ones(1)})
    assert ps["head.w"].data[0] == pytest.approx(10 * ps["deform.0.offset.0.w"].data[0])


def test_embeddings_are_not_decayed():
    ps = ParameterSet()
    ps.add("e_spa", np.ones(2))
    ps.add("head.w", np.ones(2))
    opt = AdamW(ps, lr=0.1, weight_decay=0.5)
    opt.step({})
    np.testing.assert_array_equal(ps["e_spa"].data, 1.0)
    np.testing.assert_allclose(ps["head.w"].data, 1.0 - 0.1 * 0.5)


def test_non_finite_gradient_leaves_state_untouched():
    ps = ParameterSet()
    ps.add("w", np.ones(2))
    opt = AdamW(ps)
    with pytest.raises(FloatingPointError):
        opt.step({"w": np.array([1.0, np.nan])})
    np.testing.assert_array_equal(ps["w"].data, 1.0)
    assert opt.step_count == 0


@given(st.floats(0.1, 10))
def test_clip_grad_norm(max_norm):
    grads = {"a": np.array([3.0, 0.0]), "b": np.array([[4.0]])}
    before = clip_grad_norm(grads, max_norm)
    assert before == pytest.approx(5.0)
    after = np.sqrt(sum((g ** 2).sum() for g in grads.values()))
    assert after == pytest.approx(min(5.0, max_norm), rel=1e-9)


# --- training loop --------------------------------------------------------------------

@pytest.fixture(scope="module")
def tiny_sets():
    return generate_dataset(96, seed=11), generate_dataset(32, seed=12)


def test_training_reduces_loss_and_tracks_best(tiny_sets):
    tr, va = tiny_sets
    lines = []
    res = train(small("step1", dim=4), tr, TrainConfig(epochs=4, batch_size=32, seed=0), va,
                log_fn=lines.append)
    assert len(res.log) == 4 and len(lines) == 4
    assert res.log[-1].train_loss < res.log[0].train_loss
    vals = [r.val_mpjpe for r in res.log]
    assert res.best_val_mpjpe == min(vals)
    assert res.best_epoch == int(np.argmin(vals)) + 1
    pred = predict_dataset(va, res.params, res.config)
    assert np.mean(np.linalg.norm(pred - va.gt3d, axis=-1)) == pytest.approx(min(vals))
    assert lines[0].startswith("epoch=1 lr=6.400000e-03 train_loss=")


def test_training_is_deterministic(tiny_sets):
    tr, va = tiny_sets
    tc = TrainConfig(epochs=2, batch_size=48, seed=5)
    a = train(small("step3", dim=4), tr, tc, va)
    b = train(small("step3", dim=4), tr, tc, va)
    for n in a.params.names():
        np.testing.assert_array_equal(a.params[n].data, b.params[n].data)
    assert [r.line() for r in a.log] == [r.line() for r in b.log]


def test_temporal_training_runs():
    seq = generate_sequences(4, 6, seed=0)
    cfg = small("step0", dim=4, frames=3)
    res = train(cfg, seq, TrainConfig(epochs=1, batch_size=8), seq)
    pose, pyr = batch_inputs(seq, np.arange(5), cfg)
    assert pose.shape == (5, 3, 17, 2) and pyr is None
    assert predict_dataset(seq, res.params, cfg).shape == (24, 17, 3)


@pytest.mark.filterwarnings("ignore::RuntimeWarning")
def test_divergence_restores_last_good_parameters(tiny_sets):
    tr, _ = tiny_sets
    cfg = small("step0", dim=4)
    ps = init_params(cfg)
    ps["head.w"].data[:] = 1e300
    start = ps.state()
    with pytest.raises(DivergenceError) as info:
        train(cfg, tr, TrainConfig(epochs=1, batch_size=32), params=ps)
    restored = info.value.params
    for n in restored.names():
        np.testing.assert_array_equal(restored[n].data, start[n])


def test_context_variant_needs_pyramids(tiny_sets):
    tr, _ = tiny_sets
    bare = tr.subset(np.arange(10))
    bare.bank = None
    with pytest.raises(ValueError):
        train(small("step1"), bare, TrainConfig(epochs=1))


def test_train_config_validation():
    with pytest.raises(ValueError):
        TrainConfig(epochs=0)
    with pytest.raises(ValueError):
        TrainConfig(loss_kind="huber")
    tc = TrainConfig(seed=3)
    assert TrainConfig.from_dict(tc.to_dict()) == tc


# --- checkpoints ----------------------------------------------------------------------

def test_checkpoint_round_trip_is_lossless(tmp_path):
    cfg = small("step3", frames=3)
    ps = init_params(cfg, 4)
    for t in ps.values():
        t.data = t.data + np.random.default_rng(0).normal(size=t.shape)
    write_checkpoint(tmp_path / "a.capf", cfg, ps)
    cfg2, ps2 = read_checkpoint(tmp_path / "a.capf")
    assert cfg2 == cfg and ps2.names() == ps.names()
    for n in ps.names():
        np.testing.assert_array_equal(ps2[n].data, ps[n].data)
    write_checkpoint(tmp_path / "b.capf", cfg2, ps2)
    assert (tmp_path / "a.capf").read_bytes() == (tmp_path / "b.capf").read_bytes()


@pytest.fixture(scope="module")
def capf_bytes(tmp_path_factory):
    path = tmp_path_factory.mktemp("capf") / "m.capf"
    cfg = small("step1", dim=4)
    write_checkpoint(path, cfg, init_params(cfg))
    return path.read_bytes()


@pytest.mark.parametrize("mutate, match", [
    (lambda b: b"CAPX" + b[4:], "magic"),
    (lambda b: b[:4] + b"\x02\x00" + b[6:], "version"),
    (lambda b: b[:7], "truncated"),
    (lambda b: b[:6] + (10 ** 6).to_bytes(4, "little") + b[10:], "truncated"),
    (lambda b: b[:10] + b"[" + b[11:], "config"),
    (lambda b: b[:-1], "truncated"),
    (lambda b: b + b"\x00\x00", "trailing"),
])
def test_corrupt_checkpoint_raises_format_error(tmp_path, capf_bytes, mutate, match):
    path = tmp_path / "bad.capf"
    path.write_bytes(mutate(capf_bytes))
    with pytest.raises(FormatError, match=match):
        read_checkpoint(path)


@given(st.integers(0, 200), st.integers(0, 255))
def test_checkpoint_byte_flips_never_crash(tmp_path_factory, capf_bytes, pos, value):
    buf = bytearray(capf_bytes)
    buf[pos] = value
    path = tmp_path_factory.mktemp("flip") / "f.capf"
    path.write_bytes(bytes(buf))
    try:
        read_checkpoint(path)
    except FormatError:
        pass


# --- FLOPs ----------------------------------------------------------------------------

class MacCounter:
    """Counts multiply-adds of the ops a forward pass actually executes."""

    def __init__(self, monkeypatch):
        self.total = 0
        lin, mm, bs = nx.linear, nx.matmul, nx.bilinear_sample

        def linear(x, w, b=None):
            self.total += int(np.prod(x.shape[:-1])) * w.shape[0] * w.shape[1]
            return lin(x, w, b)

        def matmul(a, b):
            out = mm(a, b)
            self.total += int(np.prod(out.shape)) * a.shape[-1]
            return out

        def bilinear_sample(fmap, points):
            out = bs(fmap, points)
            self.total += 8 * int(np.prod(out.shape))
            return out

        monkeypatch.setattr(nx, "linear", linear)
        monkeypatch.setattr(nx, "matmul", matmul)
        monkeypatch.setattr(nx, "bilinear_sample", bilinear_sample)


@pytest.mark.parametrize("variant", VARIANTS)
def test_flop_formula_matches_executed_ops(monkeypatch, variant):
    cfg = small(variant, active_levels=(True, False, True, True))
    ds = generate_dataset(1, seed=0)
    ps = init_params(cfg)
    pyr = ds.pyramid_batch([0])
    counter = MacCounter(monkeypatch)
    predict(ds.det2d, pyr, ps, cfg)
    assert counter.total == count_flops(cfg)


def test_flop_ordering_at_full_size():
    counts = [count_flops(ModelConfig(variant=v)) for v in VARIANTS]
    assert counts[0] < counts[1] < counts[2] < counts[3]


def test_flop_temporal_scaling():
    cfg = desk_config("step3")
    one = flop_breakdown(cfg)
    three = flop_breakdown(cfg.replace(frames=3))
    assert three["inter_joint"] == 3 * one["inter_joint"]
    assert three["head"] == one["head"] and "temporal" in three
    assert count_flops(cfg.replace(frames=3)) > 3 * count_flops(cfg) - 2 * one["head"]


# --- worked examples ------------------------------------------------------------------

def test_schedule_closed_forms():
    assert lr_schedule(1) == pytest.approx(6.336e-3, abs=1e-15)
    assert lr_schedule(50) == pytest.approx(6.4e-3 * 0.99 ** 50, rel=1e-15)


def test_zero_gradient_without_decay_is_identity():
    ps = init_params(small("step0"))
    before = ps.state()
    opt = AdamW(ps, weight_decay=0.0)
    opt.step({n: np.zeros_like(t.data) for n, t in ps.items()})
    for n in ps.names():
        np.testing.assert_array_equal(ps[n].data, before[n])


def test_first_step_moves_by_lr():
    ps = ParameterSet()
    ps.add("w", np.array([0.5]))
    AdamW(ps, lr=6.4e-3, weight_decay=0.0).step({"w": np.array([1.0])})
    expect = 0.5 - 6.4e-3 * 1.0 / (1.0 + 1e-8)
    assert abs(ps["w"].data[0] - expect) < 1e-12


def test_euclidean_loss_equals_mpjpe_of_one_sample():
    from ctxlift.metrics import mpjpe

    rng = np.random.default_rng(0)
    p, g = rng.normal(size=(2, 1, 17, 3))
    assert l2_loss(Tensor(p), Tensor(g)).item() == pytest.approx(mpjpe(p, g), abs=1e-12)


def test_step0_loss_descends_on_fixed_batch(tiny_sets):
    from ctxlift.training import train_step

    tr, _ = tiny_sets
    cfg = desk_config("step0")
    ps = init_params(cfg)
    opt = AdamW(ps)
    tc = TrainConfig()
    idx = np.arange(32)
    pose, pyr = batch_inputs(tr, idx, cfg)
    losses = [train_step(ps, opt, pose, pyr, tr.gt3d[idx], cfg, tc) for _ in range(20)]
    assert all(b < a for a, b in zip(losses, losses[1:]))


def test_checkpoint_preserves_validation_mpjpe(tmp_path, tiny_sets):
    from ctxlift.metrics import mpjpe

    _, va = tiny_sets
    cfg = small("step2")
    ps = init_params(cfg, 2)
    ps["head.w"].data = np.random.default_rng(2).normal(size=ps["head.w"].shape)
    write_checkpoint(tmp_path / "m.capf", cfg, ps)
    cfg2, ps2 = read_checkpoint(tmp_path / "m.capf")
    a = mpjpe(predict_dataset(va, ps, cfg), va.gt3d)
    b = mpjpe(predict_dataset(va, ps2, cfg2), va.gt3d)
    assert a == b


def test_flops_quadratic_in_width():
    a = flop_breakdown(ModelConfig(variant="step0", dim=128))
    b = flop_breakdown(ModelConfig(variant="step0", dim=256))
    assert 3.8 < b["inter_joint"] / a["inter_joint"] < 4.0


def test_flops_zero_layer_hand_sum():
    cfg = small("step0", dim=8, n_joint_layers=0)
    assert count_flops(cfg) == 17 * 2 * 8 + 17 * 8 * 3

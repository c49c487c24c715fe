"""Acceptance criteria, each at its stated tolerance.

Every test records one ``PASS``/``FAIL`` line; they are printed inline and
repeated in the terminal summary. Criteria 4 to 6 train the full protocol
(20k/2k frames, 30 epochs, batch 256, seeds 0 to 2) and share runs: the
step3 runs of the variant ladder double as the all-levels baseline of the
resolution ablation. Per-run results are written to
``acceptance_results.json`` in the repository root.
"""
import json
import subprocess
import sys
import time
from dataclasses import replace
from pathlib import Path

import numpy as np
import pytest

from ctxlift.data import FormatError, generate_sequences, read_dataset, write_dataset
from ctxlift.experiments import (
    LEVEL_MASKS, Protocol, frames_jobs, levels_jobs, run_jobs, steps_jobs, summarize,
)
from ctxlift.metrics import auc, mpjpe, mpjve, pa_mpjpe, pck, procrustes_align
from ctxlift.model import VARIANTS, ModelConfig, desk_config, init_params
from ctxlift.selftest import gradient_suite, metric_suite, reduction_suite
from ctxlift.training import count_flops, flop_breakdown, read_checkpoint, write_checkpoint
from oracles import auc_loops, mpjpe_loops, mpjve_loops, pck_loops, random_rotation

ROOT = Path(__file__).resolve().parents[1]
RESULTS_PATH = ROOT / "acceptance_results.json"
LINES = []
_RUNS = {}
_RAW = {}


@pytest.fixture(scope="module", autouse=True)
def fresh_results():
    """Start every acceptance session from an empty results file."""
    RESULTS_PATH.unlink(missing_ok=True)
    LINES.clear()
    _RUNS.clear()
    _RAW.clear()
    yield


def report(request, criterion, passed, detail):
    line = f"{'PASS' if passed else 'FAIL'} criterion {criterion}: {detail}"
    LINES.append(line)
    capman = request.config.pluginmanager.getplugin("capturemanager")
    with capman.global_and_fixture_disabled():
        print("\n" + line, flush=True)
    _save("lines", LINES)
    assert passed, line


def _save(key, value):
    doc = json.loads(RESULTS_PATH.read_text()) if RESULTS_PATH.exists() else {}
    doc[key] = value
    RESULTS_PATH.write_text(json.dumps(doc, indent=1) + "\n")


def protocol():
    return Protocol()


def runs(name):
    """Cached full-protocol suites (shared between criteria)."""
    if name not in _RUNS:
        p = protocol()
        t0 = time.perf_counter()
        if name == "steps":
            results = run_jobs(steps_jobs(p))
        elif name == "levels":
            masks = {k: v for k, v in LEVEL_MASKS.items() if k != "all"}
            runs("steps")
            results = [replace(r, label="all") for r in _RAW["steps"] if r.variant == "step3"]
            results = results + run_jobs(levels_jobs(p, masks))
        else:
            results = run_jobs(frames_jobs(p))
        _RAW[name] = results
        _RUNS[name] = summarize(results)
        _save(name, {"seconds": time.perf_counter() - t0, "protocol": p.to_dict(),
                     "rows": _RUNS[name], "runs": [r.to_dict() for r in results]})
    return _RUNS[name]


def _row(rows, label):
    return next(r for r in rows if r["label"] == label)


# --- 1 ----------------------------------------------------------------------------------

def test_criterion_1_gradient_suite(request):
    t0 = time.perf_counter()
    checks = gradient_suite(n_configs=20)
    elapsed = time.perf_counter() - t0
    worst = max(checks, key=lambda c: c.value)
    ops = sorted({c.name.split("[")[0] for c in checks})
    ok = all(c.passed for c in checks) and worst.value < 1e-4 and elapsed < 120.0
    report(request, 1, ok, f"{len(checks)} checks over 20 configs, {len(ops)} cases incl. "
           f"step3_loss; worst {worst.name} rel err {worst.value:.2e} (< 1e-4); "
           f"{elapsed:.1f} s (< 120 s)")


# --- 2 ----------------------------------------------------------------------------------

def test_criterion_2_reduction_identity(request):
    checks = reduction_suite(n_configs=20, tol=1e-10)
    worst = max(c.value for c in checks)
    report(request, 2, all(c.passed for c in checks),
           f"M=1, K=1 deformable layer vs direct bilinear sampling, max abs diff "
           f"{worst:.2e} (<= 1e-10) over {len(checks)} configs")


# --- 3 ----------------------------------------------------------------------------------

def test_criterion_3_metric_oracles(request):
    checks = metric_suite(n_pairs=1000)
    # Second route: oracles written independently of the package.
    rng = np.random.default_rng(2024)
    worst_inv, violations, worst_rot = 0.0, 0, 0.0
    for _ in range(1000):
        gt = rng.normal(0, 250, size=(17, 3))
        moved = rng.uniform(0.3, 3.0) * gt @ random_rotation(rng).T + rng.normal(0, 800, 3)
        worst_inv = max(worst_inv, pa_mpjpe(moved, gt))
        pred = rng.normal(0, 250, size=(17, 3))
        violations += pa_mpjpe(pred, gt) > mpjpe(pred, gt)
        _, (rot, _, _) = procrustes_align(pred, gt, return_transform=True)
        worst_rot = max(worst_rot, np.abs(rot.T @ rot - np.eye(3)).max(),
                        abs(np.linalg.det(rot) - 1.0))
    p, g = rng.normal(0, 120, size=(2, 6, 17, 3))
    oracle_err = max(abs(mpjpe(p, g) - mpjpe_loops(p, g)), abs(pck(p, g) - pck_loops(p, g, 150)),
                     abs(auc(p, g) - auc_loops(p, g)), abs(mpjve(p, g) - mpjve_loops(p, g)))
    ok = (all(c.passed for c in checks) and worst_inv < 1e-8 and violations == 0
          and worst_rot <= 1e-10 and oracle_err <= 1e-12)
    report(request, 3, ok, f"PA invariance {worst_inv:.1e} (< 1e-8); pa<=mpjpe violations "
           f"{violations}/1000; RtR/det err {worst_rot:.1e} (<= 1e-10); scalar-loop oracle "
           f"err {oracle_err:.1e} (<= 1e-12); selftest {sum(c.passed for c in checks)}/"
           f"{len(checks)}")


# --- 4 ----------------------------------------------------------------------------------

def test_criterion_4_context_gain(request):
    rows = runs("steps")
    m = {r["variant"]: r["mpjpe_mm"] for r in rows}
    gain = 1.0 - m["step1"] / m["step0"]
    ok = (gain >= 0.10 and m["step2"] <= m["step1"] and m["step3"] <= m["step2"]
          and m["step3"] < min(m["step0"], m["step1"], m["step2"]))
    table = ", ".join(f"{v} {m[v]:.2f}" for v in VARIANTS)
    report(request, 4, ok, f"val MPJPE mm (3 seeds) {table}; step1 vs step0 "
           f"-{100 * gain:.1f}% (>= 10%); step3 <= step2 <= step1, step3 strictly best")


# --- 5 ----------------------------------------------------------------------------------

def test_criterion_5_resolution_ablation(request):
    rows = runs("levels")
    base = _row(rows, "all")["mpjpe_mm"]
    d_high = _row(rows, "no_highest")["mpjpe_mm"] - base
    d_low = _row(rows, "no_lowest")["mpjpe_mm"] - base
    report(request, 5, d_high > d_low, f"step3 all levels {base:.2f} mm; masking highest "
           f"res +{d_high:.2f} mm vs lowest res +{d_low:.2f} mm (highest must hurt more)")


# --- 6 ----------------------------------------------------------------------------------

def test_criterion_6_temporal(request):
    rows = runs("frames")
    one, three = _row(rows, "F=1"), _row(rows, "F=3")
    cut = 1.0 - three["mpjve_mm"] / one["mpjve_mm"]
    ok = cut >= 0.25 and three["mpjpe_mm"] <= one["mpjpe_mm"]
    report(request, 6, ok, f"MPJVE F=1 {one['mpjve_mm']:.2f} -> F=3 {three['mpjve_mm']:.2f} "
           f"mm (-{100 * cut:.1f}%, >= 25%); MPJPE {one['mpjpe_mm']:.2f} -> "
           f"{three['mpjpe_mm']:.2f} mm (no worse)")


# --- 7 ----------------------------------------------------------------------------------

def test_criterion_7_flop_ordering(request):
    counts = {v: count_flops(ModelConfig(variant=v)) for v in VARIANTS}
    desk = {v: count_flops(desk_config(v)) for v in VARIANTS}
    ordered = all(counts[a] < counts[b] for a, b in zip(VARIANTS, VARIANTS[1:]))
    desk_ordered = all(desk[a] < desk[b] for a, b in zip(VARIANTS, VARIANTS[1:]))
    parts = dict(flop_breakdown(ModelConfig()))
    _save("flops", {"full_size": counts, "desk": desk, "full_size_step3_breakdown": parts})
    text = " < ".join(f"{v} {counts[v] / 1e6:.2f}M" for v in VARIANTS)
    report(request, 7, ordered and desk_ordered,
           f"full-size {text} (1 multiply-add = 1 FLOP; norms/softmax/GELU uncounted); "
           f"desk config ordering also holds")


# --- 8 ----------------------------------------------------------------------------------

TINY = ["--set", "model.dim=4", "--set", "model.n_joint_layers=1", "--set",
        "model.attention_heads=1", "--set", "model.deform_heads=1", "--set",
        "model.deform_points=1", "--set", "train.batch_size=16"]


def _commands(shared):
    data, val = str(shared / "train.capd"), str(shared / "val.capd")
    return {
        "gen-data": (["gen-data", "--out", "d.capd", "--n", "24", "--seed", "5"],
                     ["d.capd", "d.capd.config"]),
        "train": (["train", "--data", data, "--val", val, "--out", "m.capf", "--epochs", "2",
                   "--seed", "3", *TINY], ["m.capf", "m.capf.log", "m.capf.config"]),
        "eval": (["eval", "--checkpoint", "m.capf", "--data", val, "--out", "rep"],
                 ["rep.json", "rep.txt"]),
        "infer": (["infer", "--checkpoint", "m.capf", "--input", val, "--out", "p.json"],
                  ["p.json"]),
        "ablate": (["ablate", "--mode", "frames", "--out", "abl", "--set", "data.n_train=16",
                    "--set", "data.n_val=8", "--set", "data.sequence_length=4", "--set",
                    "train.epochs=1", "--set", "run.seeds=0", "--seed", "1", *TINY],
                   ["abl.json", "abl.txt"]),
        "flops": (["flops", "--out", "f.json"], ["f.json"]),
        "selftest": (["selftest", "--suite", "reduction", "--suite", "metrics", "--out",
                      "s.json"], ["s.json"]),
    }


def test_criterion_8_cli_determinism(request, tmp_path):
    shared = tmp_path / "shared"
    shared.mkdir()
    for name, n, seq, seed in (("train.capd", 32, 1, 1), ("val.capd", 12, 4, 2)):
        subprocess.run([sys.executable, "-m", "ctxlift", "gen-data", "--out", name, "--n",
                        str(n), "--sequence-length", str(seq), "--seed", str(seed),
                        "--threads", "1"], cwd=shared, check=True, capture_output=True)
    outputs = {}
    for k in range(2):
        d = tmp_path / f"run{k}"
        d.mkdir()
        for name, (args, files) in _commands(shared).items():
            proc = subprocess.run([sys.executable, "-m", "ctxlift", *args, "--threads", "1"],
                                  cwd=d, capture_output=True, text=True, timeout=900)
            assert proc.returncode == 0, f"{name}: {proc.stderr}"
            for f in files:
                outputs.setdefault((name, f), []).append((d / f).read_bytes())
    differing = sorted(f"{n}:{f}" for (n, f), blobs in outputs.items() if blobs[0] != blobs[1])
    report(request, 8, not differing, f"{len(outputs)} machine-readable outputs of "
           f"{len(_commands(shared))} commands bitwise identical across two --threads 1 runs"
           + (f"; differing: {differing}" if differing else ""))


# --- 9 ----------------------------------------------------------------------------------

def _mutations(buf):
    return {
        "magic": b"ZZZZ" + buf[4:],
        "version": buf[:4] + b"\xff\xff" + buf[6:],
        "short_header": buf[:5],
        "count_overflow": buf[:6] + b"\xff\xff\xff\x7f" + buf[10:],
        "truncated": buf[:len(buf) // 2],
        "trailing": buf + b"\x01",
        "empty": b"",
    }


def test_criterion_9_serialization(request, tmp_path):
    ds = generate_sequences(3, 2, seed=4)
    write_dataset(ds, tmp_path / "a.capd")
    back = read_dataset(tmp_path / "a.capd")
    dense = ds.materialize()
    data_ok = all(np.array_equal(getattr(dense, k), getattr(back, k))
                  for k in ("gt3d", "gt2d", "det2d", "depth", "seq_id", "frame", "seed_records"))
    data_ok &= all(np.array_equal(x, y) for x, y in zip(dense.maps, back.maps))
    write_dataset(back, tmp_path / "b.capd")
    data_ok &= (tmp_path / "a.capd").read_bytes() == (tmp_path / "b.capd").read_bytes()

    cfg = desk_config("step3", frames=3)
    ps = init_params(cfg, 9)
    write_checkpoint(tmp_path / "a.capf", cfg, ps)
    cfg2, ps2 = read_checkpoint(tmp_path / "a.capf")
    ckpt_ok = cfg2 == cfg and ps2.names() == ps.names() and all(
        np.array_equal(ps[n].data, ps2[n].data) for n in ps.names())

    caught, crashed = 0, []
    for kind, reader, src in (("capd", read_dataset, "a.capd"),
                              ("capf", read_checkpoint, "a.capf")):
        for name, blob in _mutations((tmp_path / src).read_bytes()).items():
            path = tmp_path / f"bad_{name}.{kind}"
            path.write_bytes(blob)
            try:
                reader(path)
                crashed.append(f"{kind}:{name} accepted")
            except FormatError:
                caught += 1
            except Exception as exc:  # noqa: BLE001 - any other exception is a crash
                crashed.append(f"{kind}:{name} {type(exc).__name__}")
    ok = data_ok and ckpt_ok and not crashed
    report(request, 9, ok, f"dataset round trip lossless={data_ok}, checkpoint round trip "
           f"lossless={ckpt_ok}; {caught} corrupted files raised FormatError"
           + (f"; problems: {crashed}" if crashed else ""))

"""Scripted ablation suites: variant ladder, pyramid-level masks, frame windows.

Every run is a pure function of ``(protocol, model config, seed)``, so runs
can be farmed out to worker processes without changing any result.

Seed derivation for a run with seed ``S``: noise bank ``S``, training set
``1000*S + 1``, validation set ``1000*S + 2``, parameter initialization and
batch shuffling ``S``.
"""
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, fields

import numpy as np

from .data import NoiseBank, NoiseSpec, generate_dataset, generate_sequences
from .metrics import mpjpe, sequence_mpjve
from .model import VARIANTS, desk_config
from .training import TrainConfig, count_flops, predict_dataset, train

LEVEL_MASKS = {
    "all": (True, True, True, True),
    "no_highest": (False, True, True, True),
    "no_lowest": (True, True, True, False),
}


@dataclass
class Protocol:
    """Data and optimization settings shared by every run of a suite."""

    n_train: int = 20000
    n_val: int = 2000
    epochs: int = 30
    batch_size: int = 256
    seeds: tuple = (0, 1, 2)
    gaussian_sigma: float = 0.02
    outlier_prob: float = 0.05
    outlier_radius: float = 0.2
    sequence_length: int = 50
    model: dict = field(default_factory=dict)

    def __post_init__(self):
        self.seeds = tuple(int(s) for s in self.seeds)
        if min(self.n_train, self.n_val, self.epochs, self.batch_size) < 1:
            raise ValueError("protocol sizes must be positive")
        if not self.seeds:
            raise ValueError("at least one seed is required")

    @property
    def noise(self):
        return NoiseSpec(self.gaussian_sigma, self.outlier_prob, self.outlier_radius)

    def to_dict(self):
        d = asdict(self)
        d["seeds"] = list(self.seeds)
        return d

    @classmethod
    def from_dict(cls, data):
        known = {f.name for f in fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise ValueError(f"unknown protocol keys: {sorted(unknown)}")
        return cls(**data)


@dataclass
class RunResult:
    label: str
    variant: str
    frames: int
    active_levels: tuple
    seed: int
    params: int
    flops: int
    val_mpjpe: float
    val_mpjve: float = None
    best_epoch: int = 0
    log: list = field(default_factory=list)

    def to_dict(self):
        d = asdict(self)
        d["active_levels"] = list(self.active_levels)
        return d


def make_data(protocol, seed, sequences=False):
    """Seeded train/validation datasets for one run."""
    bank = NoiseBank(seed)
    if sequences:
        length = protocol.sequence_length
        n_tr = -(-protocol.n_train // length)
        n_va = -(-protocol.n_val // length)
        train_ds = generate_sequences(n_tr, length, 1000 * seed + 1, protocol.noise, bank=bank)
        val_ds = generate_sequences(n_va, length, 1000 * seed + 2, protocol.noise, bank=bank)
        return train_ds, val_ds
    return (generate_dataset(protocol.n_train, 1000 * seed + 1, protocol.noise, bank=bank),
            generate_dataset(protocol.n_val, 1000 * seed + 2, protocol.noise, bank=bank))


def run_one(protocol, label, model_overrides, seed, sequences=False):
    """Train one configuration and score it on the validation split."""
    overrides = dict(protocol.model)
    overrides.update(model_overrides)
    config = desk_config(**overrides)
    train_ds, val_ds = make_data(protocol, seed, sequences)
    tc = TrainConfig(epochs=protocol.epochs, batch_size=protocol.batch_size, seed=seed)
    result = train(config, train_ds, tc, val_ds)
    pred = predict_dataset(val_ds, result.params, config)
    velocity = sequence_mpjve(pred, val_ds.gt3d, val_ds.seq_id, val_ds.frame) if sequences \
        else None
    return RunResult(
        label=label, variant=config.variant, frames=config.frames,
        active_levels=config.active_levels, seed=seed, params=result.params.count(),
        flops=count_flops(config), val_mpjpe=mpjpe(pred, val_ds.gt3d), val_mpjve=velocity,
        best_epoch=result.best_epoch, log=[r.line() for r in result.log])


def _run_job(job):
    return run_one(*job)


def default_workers():
    return max(1, os.cpu_count() or 1)


def run_jobs(jobs, workers=None):
    """Run ``(protocol, label, overrides, seed, sequences)`` jobs, keeping order."""
    workers = default_workers() if workers is None else workers
    if workers <= 1 or len(jobs) <= 1:
        return [_run_job(j) for j in jobs]
    with ProcessPoolExecutor(max_workers=min(workers, len(jobs))) as pool:
        return list(pool.map(_run_job, jobs))


def steps_jobs(protocol, variants=VARIANTS):
    return [(protocol, v, {"variant": v}, s, False) for s in protocol.seeds for v in variants]


def levels_jobs(protocol, masks=LEVEL_MASKS, variant="step3"):
    return [(protocol, name, {"variant": variant, "active_levels": mask}, s, False)
            for s in protocol.seeds for name, mask in masks.items()]


def frames_jobs(protocol, frames=(1, 3), variant="step3"):
    return [(protocol, f"F={f}", {"variant": variant, "frames": f}, s, True)
            for s in protocol.seeds for f in frames]


JOB_BUILDERS = {"steps": steps_jobs, "levels": levels_jobs, "frames": frames_jobs}


def run_suite(mode, protocol, workers=None):
    """Run one ablation suite; returns the per-seed :class:`RunResult` list."""
    if mode not in JOB_BUILDERS:
        raise ValueError(f"mode must be one of {sorted(JOB_BUILDERS)}")
    return run_jobs(JOB_BUILDERS[mode](protocol), workers)


def summarize(results):
    """Average per-seed results into one row per label (first-seen order)."""
    rows = {}
    for r in results:
        row = rows.setdefault(r.label, {
            "label": r.label, "variant": r.variant, "frames": r.frames,
            "active_levels": list(r.active_levels), "params": r.params, "flops": r.flops,
            "seeds": [], "mpjpe_per_seed": [], "mpjve_per_seed": []})
        row["seeds"].append(r.seed)
        row["mpjpe_per_seed"].append(r.val_mpjpe)
        if r.val_mpjve is not None:
            row["mpjve_per_seed"].append(r.val_mpjve)
    for row in rows.values():
        row["mpjpe_mm"] = float(np.mean(row["mpjpe_per_seed"]))
        row["mpjve_mm"] = float(np.mean(row["mpjve_per_seed"])) if row["mpjve_per_seed"] \
            else None
    return list(rows.values())

"""Command-line interface: ``ctxlift <command> [options]``.

Exit codes: 0 success, 2 configuration error, 3 data or format error,
4 numerical failure (non-finite values, divergence). Messages go to stderr.

Heavy imports are deferred until after ``--threads`` has been applied, so
BLAS pools start with the requested size.
"""
import argparse
import json
import os
import sys

EXIT_OK, EXIT_CONFIG, EXIT_DATA, EXIT_NUMERIC = 0, 2, 3, 4
THREAD_VARS = ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS", "MKL_NUM_THREADS",
               "NUMEXPR_NUM_THREADS", "VECLIB_MAXIMUM_THREADS", "NUMBA_NUM_THREADS")
COMMANDS = ("gen-data", "train", "eval", "infer", "ablate", "flops", "selftest")


class CliError(Exception):
    def __init__(self, message, code):
        super().__init__(message)
        self.code = code


def _peek_threads(argv):
    for i, arg in enumerate(argv):
        if arg == "--threads" and i + 1 < len(argv):
            return argv[i + 1]
        if arg.startswith("--threads="):
            return arg.split("=", 1)[1]
    return None


def limit_threads(n):
    """Cap native thread pools at ``n`` (environment first, then live pools)."""
    for var in THREAD_VARS:
        os.environ[var] = str(n)
    try:
        from threadpoolctl import threadpool_limits
    except ImportError:  # pragma: no cover - ships with scikit-learn
        return
    threadpool_limits(n)


def _common(p):
    p.add_argument("--config", help="key = value file with [model]/[train]/[data]/[run] sections")
    p.add_argument("--set", action="append", default=[], metavar="SECTION.KEY=VALUE",
                   help="override one config key (repeatable; flags win over the file)")
    p.add_argument("--seed", type=int, help="top-level seed (run.seed)")
    p.add_argument("--threads", type=int, help="native thread count; 1 = deterministic mode")


def build_parser():
    from .runconfig import describe_keys

    epilog = "accepted config keys:\n" + describe_keys()
    fmt = argparse.RawDescriptionHelpFormatter
    parser = argparse.ArgumentParser(prog="ctxlift", description="Context-aware 3D pose lifting.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen-data", help="write a synthetic CAPD dataset", epilog=epilog,
                       formatter_class=fmt)
    _common(p)
    p.add_argument("--out", required=True)
    p.add_argument("--n", type=int, help="number of frames (data.n_train)")
    p.add_argument("--sequence-length", type=int, help="frames per sequence")

    p = sub.add_parser("train", help="train a model, write checkpoint and log", epilog=epilog,
                       formatter_class=fmt)
    _common(p)
    p.add_argument("--data", help="CAPD training file (default: generate from [data])")
    p.add_argument("--val", help="CAPD validation file (default: generate from [data])")
    p.add_argument("--out", required=True, help="checkpoint path (.capf)")
    p.add_argument("--log", help="epoch log path (default: <out>.log)")
    p.add_argument("--variant", choices=("step0", "step1", "step2", "step3"))
    p.add_argument("--epochs", type=int)

    p = sub.add_parser("eval", help="score a checkpoint on a dataset", epilog=epilog,
                       formatter_class=fmt)
    _common(p)
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--out", required=True, help="report stem: writes <out>.json and <out>.txt")

    p = sub.add_parser("infer", help="predict 3D poses for a sample file", epilog=epilog,
                       formatter_class=fmt)
    _common(p)
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--input", required=True, help="CAPD file")
    p.add_argument("--out", required=True, help="JSON pose file")

    p = sub.add_parser("ablate", help="run an ablation suite", epilog=epilog,
                       formatter_class=fmt)
    _common(p)
    p.add_argument("--mode", choices=("steps", "levels", "frames"), required=True)
    p.add_argument("--out", required=True, help="report stem")
    p.add_argument("--workers", type=int, help="parallel training processes (run.workers)")

    p = sub.add_parser("flops", help="print analytic FLOP counts per variant", epilog=epilog,
                       formatter_class=fmt)
    _common(p)
    p.add_argument("--out", help="also write JSON here")
    p.add_argument("--full-size", action="store_true",
                   help="count the full-size default model instead of the [model] section")

    p = sub.add_parser("selftest", help="run the built-in property suites", epilog=epilog,
                       formatter_class=fmt)
    _common(p)
    p.add_argument("--suite", action="append", choices=("gradient", "reduction", "metrics"))
    p.add_argument("--out", help="write per-check JSON here")
    return parser


def resolve_config(args):
    from .runconfig import RunConfig

    cfg = RunConfig()
    if args.config:
        if not os.path.exists(args.config):
            raise CliError(f"config file not found: {args.config}", EXIT_CONFIG)
        cfg.load_file(args.config)
    cfg.apply_overrides(args.set)
    flag_keys = {"seed": ("run", "seed"), "threads": ("run", "threads"),
                 "variant": ("model", "variant"), "epochs": ("train", "epochs"),
                 "n": ("data", "n_train"), "sequence_length": ("data", "sequence_length"),
                 "workers": ("run", "workers")}
    for attr, (section, key) in flag_keys.items():
        value = getattr(args, attr, None)
        if value is not None:
            cfg.set(section, key, value)
    return cfg


def _snapshot(cfg, path):
    with open(f"{path}.config", "w", encoding="utf-8") as fh:
        fh.write(cfg.snapshot())


def _noise(cfg):
    from .data import NoiseSpec

    return NoiseSpec(cfg.get("data", "gaussian_sigma"), cfg.get("data", "outlier_prob"),
                     cfg.get("data", "outlier_radius"))


def _generate(cfg, n, seed):
    from .data import NoiseBank, generate_sequences

    length = cfg.get("data", "sequence_length")
    if length < 1:
        raise CliError("data.sequence_length must be >= 1", EXIT_CONFIG)
    n_seq = -(-n // length)
    return generate_sequences(n_seq, length, seed, _noise(cfg),
                              bank=NoiseBank(cfg.get("run", "seed")))


def cmd_gen_data(args, cfg):
    from .data import write_dataset

    seed = cfg.get("run", "seed")
    ds = _generate(cfg, cfg.get("data", "n_train"), seed)
    write_dataset(ds, args.out)
    _snapshot(cfg, args.out)
    print(f"wrote {len(ds)} frames to {args.out}")


def _read(path):
    from .data import read_dataset

    if not os.path.exists(path):
        raise CliError(f"no such file: {path}", EXIT_DATA)
    return read_dataset(path)


def cmd_train(args, cfg):
    from .training import train, write_checkpoint

    config = cfg.model_config()
    tc = cfg.train_config()
    seed = cfg.get("run", "seed")
    train_ds = _read(args.data) if args.data else _generate(cfg, cfg.get("data", "n_train"),
                                                            1000 * seed + 1)
    val_ds = _read(args.val) if args.val else (
        None if args.data else _generate(cfg, cfg.get("data", "n_val"), 1000 * seed + 2))
    log_path = args.log or f"{args.out}.log"
    with open(log_path, "w", encoding="utf-8") as log:
        def emit(line):
            log.write(line + "\n")
            log.flush()
            print(line, file=sys.stderr)

        result = train(config, train_ds, tc, val_ds, log_fn=emit)
    write_checkpoint(args.out, config, result.params)
    _snapshot(cfg, args.out)
    print(f"best epoch {result.best_epoch}; checkpoint {args.out}")


def cmd_eval(args, cfg):
    from .metrics import evaluate
    from .training import predict_dataset, read_checkpoint

    config, params = read_checkpoint(args.checkpoint)
    ds = _read(args.data)
    _check_compatible(config, ds)
    pred = predict_dataset(ds, params, config)
    report = evaluate(pred, ds.gt3d, ds.seq_id, ds.frame)
    with open(f"{args.out}.json", "w", encoding="utf-8") as fh:
        fh.write(report.to_json())
    with open(f"{args.out}.txt", "w", encoding="utf-8") as fh:
        fh.write(report.to_text())
    _snapshot(cfg, args.out)
    print(report.to_text(), end="")


def _check_compatible(config, ds):
    if ds.n_joints != config.n_joints:
        raise CliError(f"dataset has {ds.n_joints} joints, model expects {config.n_joints}",
                       EXIT_DATA)
    if config.uses_context and ds.n_levels != config.n_levels:
        raise CliError(f"model needs {config.n_levels} pyramid levels, file has {ds.n_levels}",
                       EXIT_DATA)


def cmd_infer(args, cfg):
    from .training import predict_dataset, read_checkpoint

    config, params = read_checkpoint(args.checkpoint)
    ds = _read(args.input)
    _check_compatible(config, ds)
    pred = predict_dataset(ds, params, config)
    doc = {"units": "mm", "root_relative": True, "joints": config.n_joints,
           "poses": pred.tolist()}
    with open(args.out, "w", encoding="utf-8") as fh:
        json.dump(doc, fh)
        fh.write("\n")
    print(f"wrote {len(pred)} poses to {args.out}")


def _protocol(cfg):
    from .experiments import Protocol

    model = dict(cfg.values["model"])
    model.pop("variant")
    model.pop("frames")
    model.pop("active_levels")
    length = cfg.get("data", "sequence_length")
    return Protocol(
        n_train=cfg.get("data", "n_train"), n_val=cfg.get("data", "n_val"),
        epochs=cfg.get("train", "epochs"), batch_size=cfg.get("train", "batch_size"),
        seeds=cfg.get("run", "seeds"), gaussian_sigma=cfg.get("data", "gaussian_sigma"),
        outlier_prob=cfg.get("data", "outlier_prob"),
        outlier_radius=cfg.get("data", "outlier_radius"),
        sequence_length=length if length > 1 else 50,
        model=model)


def cmd_ablate(args, cfg):
    from .experiments import run_suite, summarize
    from .report import emit_report, format_table, table_rows

    protocol = _protocol(cfg)
    results = run_suite(args.mode, protocol, workers=cfg.get("run", "workers"))
    summary = summarize(results)
    emit_report(args.mode, summary, args.out,
                extra={"protocol": protocol.to_dict(), "runs": [r.to_dict() for r in results]})
    _snapshot(cfg, args.out)
    print(format_table(args.mode, table_rows(args.mode, summary)), end="")


def cmd_flops(args, cfg):
    from .model import VARIANTS, ModelConfig
    from .training import count_flops

    base = ModelConfig() if args.full_size else cfg.model_config()
    rows = []
    for v in VARIANTS:
        config = base.replace(variant=v)
        rows.append({"variant": v, "flops": count_flops(config)})
    for r in rows:
        print(f"{r['variant']:>6}  {r['flops'] / 1e6:12.3f} M")
    if args.out:
        with open(args.out, "w", encoding="utf-8") as fh:
            json.dump({"model": base.to_dict(), "rows": rows}, fh, indent=2)
            fh.write("\n")


def cmd_selftest(args, cfg):
    from .selftest import run_selftest

    ok, checks = run_selftest(args.suite, out=lambda line: print(line, file=sys.stderr))
    if args.out:
        with open(args.out, "w", encoding="utf-8") as fh:
            json.dump([{"suite": c.suite, "name": c.name, "passed": bool(c.passed),
                        "value": c.value, "limit": c.limit} for c in checks], fh, indent=1)
            fh.write("\n")
    print("selftest passed" if ok else "selftest FAILED")
    if not ok:
        raise CliError("selftest failed", EXIT_NUMERIC)


HANDLERS = {"gen-data": cmd_gen_data, "train": cmd_train, "eval": cmd_eval,
            "infer": cmd_infer, "ablate": cmd_ablate, "flops": cmd_flops,
            "selftest": cmd_selftest}


def _classify(exc):
    from .data.io import FormatError
    from .model import ConfigError, MissingPyramidError
    from .numerics import NonFiniteError
    from .report import ReportError
    from .runconfig import RunConfigError
    from .training import DivergenceError, NonFiniteGradientError

    if isinstance(exc, CliError):
        return exc.code
    if isinstance(exc, (RunConfigError, ConfigError)):
        return EXIT_CONFIG
    if isinstance(exc, (FormatError, MissingPyramidError, ReportError, OSError)):
        return EXIT_DATA
    if isinstance(exc, (DivergenceError, NonFiniteGradientError, NonFiniteError,
                        FloatingPointError)):
        return EXIT_NUMERIC
    if isinstance(exc, ValueError):
        return EXIT_CONFIG
    return None


def main(argv=None):
    argv = list(sys.argv[1:] if argv is None else argv)
    threads = _peek_threads(argv)
    if threads is not None and threads.isdigit() and int(threads) > 0:
        limit_threads(int(threads))
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        cfg = resolve_config(args)
        n = cfg.get("run", "threads")
        if n and threads is None:
            limit_threads(n)
        HANDLERS[args.command](args, cfg)
    except Exception as exc:  # noqa: BLE001 - mapped onto the exit-code contract
        code = _classify(exc)
        if code is None:
            raise
        print(f"ctxlift {args.command}: error: {exc}", file=sys.stderr)
        return code
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())

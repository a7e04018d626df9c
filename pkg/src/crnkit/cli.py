"""``crnkit`` command line.

Exit codes: 0 success, 1 check failure, 2 usage error, 3 I/O error.
"""
import argparse
import json
import os
import sys
from pathlib import Path

import numpy as np

from .checks import SUITES, TOLERANCE, run_suite
from .errors import BundleFormatError, ConfigurationError, CrnkitError

EXIT_OK, EXIT_FAIL, EXIT_USAGE, EXIT_IO = 0, 1, 2, 3


class UsageError(Exception):
    pass


def _int_list(text, name):
    try:
        values = [int(v) for v in text.split(",") if v.strip()]
    except ValueError as exc:
        raise UsageError(f"--{name}: expected comma-separated integers, got {text!r}") from exc
    if not values:
        raise UsageError(f"--{name}: empty list")
    return values


def _level_list(text):
    out = []
    for v in text.split(","):
        try:
            lv = float(v)
        except ValueError as exc:
            raise UsageError(f"--levels: bad level {v!r}") from exc
        if lv not in (1, 1.5, 2, 3):
            raise UsageError(f"--levels: level must be 1, 1.5, 2 or 3, got {v!r}")
        out.append(int(lv) if lv.is_integer() else lv)
    return out


# -- gradcheck -----------------------------------------------------------------


def cmd_gradcheck(args, out):
    if args.form not in SUITES:
        raise UsageError(f"unknown form {args.form!r}; choose from {', '.join(SUITES)}")
    if not args.eps > 0:
        raise UsageError(f"--eps must be positive, got {args.eps}")
    dims = _int_list(args.dims, "dims")
    if len(dims) != 3 or min(dims) < 1:
        raise UsageError("--dims takes three positive integers n,K,F")
    report = run_suite(args.form, dims, eps=args.eps, seed=args.seed, corrupt=args.corrupt_grad)
    ok = True
    for group, err in sorted(report.items()):
        status = "ok" if err < TOLERANCE else "FAIL"
        ok &= err < TOLERANCE
        out.write(f"{group:<40s} max_rel_err={err:.3e} {status}\n")
    out.write(f"gradcheck {args.form}: {'PASS' if ok else 'FAIL'} (tolerance {TOLERANCE:g})\n")
    return EXIT_OK if ok else EXIT_FAIL


# -- train / eval ----------------------------------------------------------------


def _load_config(path):
    from .config import load_run_config

    if not Path(path).is_file():
        raise FileNotFoundError(f"config file not found: {path}")
    return load_run_config(path)


def cmd_train(args, out):
    from .training import header_line, resolve_bundles, train

    cfg = _load_config(args.config)
    if args.epochs is not None:
        if args.epochs < 1:
            raise UsageError(f"--epochs must be >= 1, got {args.epochs}")
        cfg.optim.epochs = args.epochs
    out_dir = Path(args.out or cfg.out_dir)
    train_b, eval_b = resolve_bundles(cfg)
    out_dir.mkdir(parents=True, exist_ok=True)
    (out_dir / "config.json").write_text(cfg.to_json() + "\n", encoding="utf-8")
    with open(out_dir / "metrics.jsonl", "w", encoding="utf-8") as log:
        log.write(header_line("train", seed=cfg.seed) + "\n")
        result = train(cfg, train_b, eval_b, log=log, checkpoint=out_dir / "checkpoint.npz")
    final = result.history[-1]
    out.write(json.dumps(final, sort_keys=True) + "\n")
    return EXIT_OK


def cmd_eval(args, out):
    from .training import build_model, evaluate, load_checkpoint, resolve_bundles

    cfg = _load_config(args.config)
    train_b, eval_b = resolve_bundles(cfg)
    bundle = eval_b if eval_b is not None else train_b
    model = build_model(cfg.model, bundle)
    if not Path(args.checkpoint).is_file():
        raise FileNotFoundError(f"checkpoint not found: {args.checkpoint}")
    load_checkpoint(model, args.checkpoint)
    metrics = evaluate(model, bundle, cfg.optim.batch, seed=cfg.seed)
    out.write(json.dumps(metrics, sort_keys=True) + "\n")
    return EXIT_OK


# -- bench -------------------------------------------------------------------------


def cmd_bench(args, out):
    from .bench import compare, measure, table_config, write_csv

    if args.repeats < 3:
        raise UsageError(f"--repeats must be >= 3, got {args.repeats}")
    levels = _level_list(args.levels)
    widths = _int_list(args.F, "F")
    reports = []
    pairs = []
    for F in widths:
        by_level = {}
        for lv in levels:
            try:
                cfg = table_config(lv, N=args.N, T=args.T, P=args.P, Q=args.Q, F=F)
            except ConfigurationError as exc:
                raise UsageError(str(exc)) from exc
            rep = measure(cfg, repeats=args.repeats, seed=args.seed, batch=args.batch)
            reports.append(rep)
            by_level[lv] = rep
        if 2 in by_level and 3 in by_level:
            pairs.append((by_level[2], by_level[3]))
    if args.out:
        with open(args.out, "w", encoding="utf-8", newline="") as fh:
            write_csv(reports, fh)
    else:
        write_csv(reports, out)
    for shallow, deep in pairs:
        out.write("# " + compare(shallow, deep) + "\n")
    return EXIT_OK


# -- gen / inspect -----------------------------------------------------------------


def cmd_gen(args, out):
    from .data import SyntheticTaskSpec, generate, save_feature_bundle

    lo_hi = _int_list(args.motif_range, "motif-range")
    if len(lo_hi) != 2:
        raise UsageError("--motif-range takes lo,hi")
    seed = int(os.environ.get("CRNKIT_SEED", args.seed))
    try:
        spec = SyntheticTaskSpec(
            kind=args.kind,
            samples=args.samples,
            N=args.N,
            T=args.T,
            d=args.d,
            motif_range=tuple(lo_hi),
            noise=args.noise,
            seed=seed,
            task_seed=args.task_seed,
            A=args.A,
            S=args.S,
        )
        bundle = generate(spec)
    except CrnkitError as exc:
        raise UsageError(str(exc)) from exc
    save_feature_bundle(bundle, args.out)
    out.write(f"wrote {args.out}: task={bundle.task} samples={len(bundle)}\n")
    return EXIT_OK


def cmd_inspect(args, out):
    from .data import load_feature_bundle

    bundle = load_feature_bundle(args.bundle)
    out.write(f"task {bundle.task}\n")
    for key, value in bundle.meta.items():
        out.write(f"meta {key} {value}\n")
    for name, dtype, shape, offset in bundle.manifest():
        arr = bundle.tensors[name]
        dims = ",".join(str(s) for s in shape)
        stats = f"mean={float(np.mean(arr)):.4g} std={float(np.std(arr)):.4g}" if arr.size else "empty"
        out.write(f"{name} {dtype} {dims} {offset} {stats}\n")
    return EXIT_OK


# -- entry point -------------------------------------------------------------------


def build_parser():
    p = argparse.ArgumentParser(prog="crnkit", description="CRN / HCRN toolkit")
    sub = p.add_subparsers(dest="command", required=True)

    g = sub.add_parser("gradcheck", help="finite-difference gradient check of one component")
    g.add_argument("--form", required=True, help=f"one of: {', '.join(SUITES)}")
    g.add_argument("--dims", default="5,2,4", help="n,K,F of the test objects")
    g.add_argument("--eps", type=float, default=1e-5)
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--corrupt-grad", type=float, default=0.0, help=argparse.SUPPRESS)
    g.set_defaults(func=cmd_gradcheck)

    t = sub.add_parser("train", help="train from a JSON run config")
    t.add_argument("config")
    t.add_argument("--out", help="output directory (overrides out_dir)")
    t.add_argument("--epochs", type=int, help="override optim.epochs")
    t.set_defaults(func=cmd_train)

    e = sub.add_parser("eval", help="evaluate a checkpoint")
    e.add_argument("config")
    e.add_argument("checkpoint")
    e.set_defaults(func=cmd_eval)

    b = sub.add_parser("bench", help="analytic cost and measured MACs / wall-clock")
    b.add_argument("--levels", default="2,3")
    b.add_argument("--N", type=int, default=24)
    b.add_argument("--T", type=int, default=16)
    b.add_argument("--P", type=int, default=4)
    b.add_argument("--Q", type=int, default=6)
    b.add_argument("--F", default="32", help="comma-separated widths")
    b.add_argument("--repeats", type=int, default=5)
    b.add_argument("--batch", type=int, default=1)
    b.add_argument("--seed", type=int, default=0)
    b.add_argument("--out", help="CSV path (default: stdout)")
    b.set_defaults(func=cmd_bench)

    n = sub.add_parser("gen", help="write a synthetic feature bundle")
    n.add_argument("--kind", required=True, choices=("count", "transition", "longform-choice"))
    n.add_argument("--out", required=True)
    n.add_argument("--samples", type=int, default=256)
    n.add_argument("--N", type=int, default=8)
    n.add_argument("--T", type=int, default=8)
    n.add_argument("--d", type=int, default=32)
    n.add_argument("--motif-range", default="0,8")
    n.add_argument("--noise", type=float, default=1.0)
    n.add_argument("--seed", type=int, default=0)
    n.add_argument("--task-seed", type=int, default=0)
    n.add_argument("--A", type=int, default=5)
    n.add_argument("--S", type=int, default=48)
    n.set_defaults(func=cmd_gen)

    i = sub.add_parser("inspect", help="dump a bundle manifest")
    i.add_argument("bundle")
    i.set_defaults(func=cmd_inspect)
    return p


def main(argv=None, out=None, err=None):
    out = out or sys.stdout
    err = err or sys.stderr
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code) if exc.code is not None else EXIT_OK
    try:
        return args.func(args, out)
    except UsageError as exc:
        err.write(f"crnkit {args.command}: usage error: {exc}\n")
        return EXIT_USAGE
    except (FileNotFoundError, IsADirectoryError, PermissionError, BundleFormatError) as exc:
        err.write(f"crnkit {args.command}: I/O error: {exc}\n")
        return EXIT_IO
    except ConfigurationError as exc:
        err.write(f"crnkit {args.command}: usage error: {exc}\n")
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())

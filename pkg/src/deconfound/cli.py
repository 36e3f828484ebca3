"""Benchmark command line: run, sweep, tune-alpha, report, gen-data, hist.

Hyperparameter resolution order is explicit flag > config file > shipped
defaults; the resolved values are logged per run in runlog.txt.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

try:
    import tomllib
except ImportError:  # python 3.10
    import tomli as tomllib

from . import evaluation, harness, ihdp, synth
from .estimators import estimator_from_name
from .harness import ExperimentConfig
from .zoo import ESTIMATOR_NAMES

ALL_ESTIMATORS = tuple(sorted(ESTIMATOR_NAMES))


def parse_realizations(text):
    """'A..B' inclusive range, or a single id."""
    if ".." in text:
        lo, hi = text.split("..", 1)
        lo, hi = int(lo), int(hi)
        if lo > hi:
            raise argparse.ArgumentTypeError(f"empty realization range {text!r}")
        return list(range(lo, hi + 1))
    return [int(text)]


def parse_estimators(text):
    names = [e.strip() for e in text.split(",") if e.strip()]
    if not names:
        raise argparse.ArgumentTypeError("empty estimator list")
    for n in names:
        if n not in ESTIMATOR_NAMES:
            raise argparse.ArgumentTypeError(
                f"unknown estimator {n!r}; expected one of {ALL_ESTIMATORS}")
    return names


def add_common_flags(p):
    p.add_argument("--config", help="TOML config file; flags override its values")
    p.add_argument("--bench", choices=("synthetic", "ihdp"), default=None)
    p.add_argument("--estimators", type=parse_estimators, default=None,
                   help="comma-separated estimator names")
    p.add_argument("--n", type=int, default=None, help="synthetic dataset size")
    p.add_argument("--confounders", type=int, default=None,
                   help="number of confounding covariates (synthetic)")
    p.add_argument("--noise-sigma", type=float, default=None,
                   help="synthetic observation-noise scale")
    p.add_argument("--xi", type=float, default=None, help="selection-bias strength")
    p.add_argument("--seeds", type=int, default=None, help="runs per estimator")
    p.add_argument("--seed", type=int, default=None, help="base seed")
    p.add_argument("--jobs", type=int, default=None, help="parallel jobs")
    p.add_argument("--out", default=None, help="output directory")
    p.add_argument("--lambda0", type=float, default=None,
                   help="GRL constant factor (overrides the shipped table)")
    p.add_argument("--gamma", type=int, default=None, help="GRL ramp epochs")
    p.add_argument("--alpha", type=float, default=None,
                   help="supervised-loss weighting coefficient")
    p.add_argument("--alpha-mode", choices=("unit", "alpha"), default=None)
    p.add_argument("--ihdp-dir", default=None,
                   help=f"IHDP CSV directory (or set {ihdp.ENV_VAR})")
    p.add_argument("--realizations", type=parse_realizations, default=None,
                   help="IHDP realization range, e.g. 1..10")
    p.add_argument("--batch-size", type=int, default=None)
    p.add_argument("--lr", type=float, default=None)
    p.add_argument("--l2-lambda1", type=float, default=None)
    p.add_argument("--ortho-lambda2", type=float, default=None)
    p.add_argument("--val-fraction", type=float, default=None)
    p.add_argument("--max-epochs", type=int, default=None)
    p.add_argument("--patience", type=int, default=None)


def load_config_file(path):
    if path is None:
        return {}
    with open(path, "rb") as fh:
        return tomllib.load(fh)


def build_experiment_config(args):
    """Merge flags over config file over defaults into an ExperimentConfig."""
    file_cfg = load_config_file(args.config)
    exp = file_cfg.get("experiment", {})
    train = file_cfg.get("train", {})
    dgp = file_cfg.get("dgp", {})

    def pick(flag, *file_values, default=None):
        if flag is not None:
            return flag
        for v in file_values:
            if v is not None:
                return v
        return default

    estimators = pick(args.estimators, exp.get("estimators"))
    if estimators is None:
        raise ValueError("no estimators given; pass --estimators or set them in the config file")

    kwargs = dict(
        estimators=list(estimators),
        bench=pick(args.bench, exp.get("bench"), default="synthetic"),
        out_dir=pick(args.out, exp.get("out"), default="runs"),
        n=int(pick(args.n, dgp.get("n"), exp.get("n"), default=3000)),
        confounders=int(pick(args.confounders, dgp.get("confounders"), default=10)),
        noise_sigma=float(pick(args.noise_sigma, dgp.get("noise_sigma"), default=1.0)),
        xi=float(pick(args.xi, dgp.get("xi"), default=3.0)),
        n_seeds=int(pick(args.seeds, exp.get("seeds"), default=10)),
        seed=int(pick(args.seed, exp.get("seed"), default=0)),
        jobs=int(pick(args.jobs, exp.get("jobs"), default=1)),
        alpha_mode=pick(args.alpha_mode, exp.get("alpha_mode"), default="unit"),
        lambda0=args.lambda0,
        gamma=args.gamma,
        alpha=args.alpha,
        file_lambda0=train.get("lambda0"),
        file_gamma=train.get("gamma"),
        file_alpha=train.get("alpha"),
        ihdp_dir=pick(args.ihdp_dir, exp.get("ihdp_dir")),
        batch_size=int(pick(args.batch_size, train.get("batch_size"), default=100)),
        lr=float(pick(args.lr, train.get("lr"), default=1e-4)),
        l2_lambda1=float(pick(args.l2_lambda1, train.get("l2_lambda1"), default=1e-4)),
        ortho_lambda2=pick(args.ortho_lambda2, train.get("ortho_lambda2")),
        val_fraction=pick(args.val_fraction, train.get("val_fraction")),
        max_epochs=int(pick(args.max_epochs, train.get("max_epochs"), default=1000)),
        patience=int(pick(args.patience, train.get("patience"), default=50)),
    )
    realizations = pick(args.realizations, exp.get("realizations"))
    if realizations is not None:
        kwargs["realizations"] = [int(r) for r in realizations]
    return ExperimentConfig(**kwargs)


def cmd_run(args):
    config = build_experiment_config(args)
    harness.run_experiment(config)
    table = harness.render_report(config.out_dir)
    print(table)
    print(f"\nper-run records: {Path(config.out_dir) / 'runs.csv'}")
    return 0


def cmd_sweep(args):
    config = build_experiment_config(args)
    harness.sweep(args.kind, config)
    print(f"sweep data: {Path(config.out_dir) / 'sweep.csv'}")
    return 0


def cmd_tune_alpha(args):
    config = build_experiment_config(args)
    if len(config.estimators) != 1:
        raise ValueError("tune-alpha takes exactly one estimator")
    best, visited = harness.tune_alpha(config.estimators[0], config)
    for alpha, score in visited:
        print(f"alpha={alpha:g} score={score:.6f}")
    print(f"best alpha: {best:g}")
    return 0


def cmd_report(args):
    table = harness.render_report(args.run_dir, estimators=args.estimators)
    print(table)
    return 0


def cmd_gen_data(args):
    config = build_experiment_config(args)
    if config.bench != "synthetic":
        raise ValueError("gen-data only generates synthetic datasets")
    out = Path(config.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    for s in range(config.n_seeds):
        dgp = config.dgp_config(s)
        ds = synth.generate(dgp)
        path = out / f"data_{dgp.label}_s{s}.csv"
        synth.to_csv(ds, path)
        print(f"wrote {path} (n={ds.n}, treated={int(ds.t.sum())})")
    return 0


def cmd_hist(args):
    config = build_experiment_config(args)
    out = Path(config.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    tasks = harness.build_tasks(config)
    for task in tasks:
        train_data, val_data, test_data = harness._load_run_data(task)
        est = estimator_from_name(
            task.estimator, batch_size=config.batch_size, lr=config.lr,
            l2_lambda1=config.l2_lambda1, ortho_lambda2=config.effective_ortho_lambda2,
            max_epochs=config.max_epochs, patience=config.patience,
            val_fraction=config.effective_val_fraction, alpha=task.alpha,
            lambda0=task.lambda0, gamma=task.gamma,
            random_state=harness._sub_seed(config.seed, task.seed_idx, 1))
        est.fit(train_data.X, train_data.t, train_data.y,
                X_val=val_data.X, t_val=val_data.t, y_val=val_data.y)
        if est.diverged_:
            print(f"{task.estimator} seed={task.seed_idx}: diverged, no histogram")
            continue
        lo, hi, counts = evaluation.propensity_histogram(est.model_, test_data.X,
                                                         bins=args.bins)
        stem = harness.trace_filename(task_result_stub(task)).replace(".csv", "")
        path = out / f"hist_{stem}.csv"
        evaluation.write_histogram_csv(path, lo, hi, counts)
        print(f"wrote {path}")
    return 0


def task_result_stub(task):
    """Adapter so hist outputs reuse the run-file naming scheme."""
    class _Stub:
        estimator = task.estimator
        seed_idx = task.seed_idx
        realization = task.realization
    return _Stub


def main(argv=None):
    parser = argparse.ArgumentParser(
        prog="deconfound",
        description="Adversarially de-confounded treatment effect benchmarks")
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="train and evaluate estimators")
    add_common_flags(p_run)
    p_run.set_defaults(fn=cmd_run)

    p_sweep = sub.add_parser("sweep", help="dataset-size or confounding sweep")
    p_sweep.add_argument("kind", choices=("size", "confounding"))
    add_common_flags(p_sweep)
    p_sweep.set_defaults(fn=cmd_sweep)

    p_tune = sub.add_parser("tune-alpha", help="greedy coefficient search")
    add_common_flags(p_tune)
    p_tune.set_defaults(fn=cmd_tune_alpha)

    p_report = sub.add_parser("report", help="render a comparison table from run records")
    p_report.add_argument("run_dir")
    p_report.add_argument("--estimators", type=parse_estimators, default=None)
    p_report.set_defaults(fn=cmd_report)

    p_gen = sub.add_parser("gen-data", help="persist synthetic datasets as CSV")
    add_common_flags(p_gen)
    p_gen.set_defaults(fn=cmd_gen_data)

    p_hist = sub.add_parser("hist", help="treatment-probability histograms")
    add_common_flags(p_hist)
    p_hist.add_argument("--bins", type=int, default=10)
    p_hist.set_defaults(fn=cmd_hist)

    args = parser.parse_args(argv)
    try:
        return args.fn(args)
    except (ValueError, FileNotFoundError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())

"""Command-line entry point.

Subcommands: pretrain, train, experiment, sweep, export. Flags may also
be supplied through a JSON config file (`--config FILE`); explicit flags
override file values. `SSLGCN_DATA_ROOT` provides a default parent for
dataset directories. Exit codes: 0 success, 2 usage/validation error,
1 runtime error. All file outputs are written atomically.
"""

from __future__ import annotations

import argparse
import json
import os
import sys

from .data_io import dataset_meta, load_dataset, validate_against_reference
from .errors import (ConfigError, DataFormatError, DatasetValidationError,
                     SslGcnError, TransferError, UsageError)
from .model import WeightSnapshot, random_snapshot
from .ssl_task import SslConfig, Strategy
from .train import (DEFAULT_STRATEGIES, ExperimentConfig, FinetuneConfig,
                    PretrainConfig, config_fingerprint, export_embeddings,
                    finetune, pretrain, run_experiment, sweep)

STRATEGY_CHOICES = ("rrl", "rcf", "both")

# harness-scale training budgets: large enough to converge on the
# citation benchmarks, small enough that a 10-run experiment stays in
# the minutes range on a desktop CPU
DEFAULT_PRETRAIN_EPOCHS = 200
DEFAULT_PRETRAIN_PATIENCE = 200
DEFAULT_FINETUNE_EPOCHS = 400
DEFAULT_FINETUNE_PATIENCE = 50


def _atomic_write_text(path, text):
    tmp = f"{path}.tmp"
    with open(tmp, "w", encoding="utf-8") as fh:
        fh.write(text)
    os.replace(tmp, path)


def _write_json(path, payload):
    _atomic_write_text(path, json.dumps(payload, sort_keys=True, indent=2) + "\n")


def _resolve_data_dir(value):
    if os.path.isdir(value):
        return value
    root = os.environ.get("SSLGCN_DATA_ROOT")
    if root:
        candidate = os.path.join(root, value)
        if os.path.isdir(candidate):
            return candidate
    raise ConfigError(f"dataset directory not found: {value}")


def _load_config_file(path):
    if not os.path.isfile(path):
        raise ConfigError(f"config file not found: {path}")
    with open(path, encoding="utf-8") as fh:
        values = json.load(fh)
    if not isinstance(values, dict):
        raise ConfigError("config file must hold a JSON object")
    return values


def _fraction(text):
    value = float(text)
    if not 0.0 <= value <= 1.0:
        raise argparse.ArgumentTypeError(f"fraction out of [0,1]: {value}")
    return value


def _add_common(p):
    # --data/--out may also come from the config file, so presence is
    # validated after the merge rather than by argparse
    p.add_argument("--data", help="dataset directory (interchange format)")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--config", help="JSON config file; flags override it")


def _ssl_config(args) -> SslConfig:
    return SslConfig(strategy=Strategy(args.strategy),
                     removal_fraction=args.remove, cover_fraction=args.cover,
                     seed=args.seed)


def _pretrain_config(args) -> PretrainConfig:
    return PretrainConfig(
        ssl=_ssl_config(args),
        max_epochs=args.epochs, patience=args.patience,
        lr=args.lr, hidden=args.hidden, dropout=args.dropout,
        decode_depth=args.decode_depth,
        use_sampled_loss=True if args.sampled_loss else None,
        neg_per_pos=args.neg_per_pos,
    )


def _finetune_config(args) -> FinetuneConfig:
    return FinetuneConfig(max_epochs=args.finetune_epochs,
                          patience=args.finetune_patience,
                          lr=args.lr, hidden=args.hidden, dropout=args.dropout)


def _add_pretrain_flags(p):
    p.add_argument("--strategy", choices=STRATEGY_CHOICES, default="both")
    p.add_argument("--remove", type=_fraction, default=0.4,
                   help="fraction of undirected edges to delete")
    p.add_argument("--cover", type=_fraction, default=0.4,
                   help="fraction of nonzero features to zero per node")
    p.add_argument("--epochs", type=int, default=DEFAULT_PRETRAIN_EPOCHS)
    p.add_argument("--patience", type=int, default=DEFAULT_PRETRAIN_PATIENCE)
    p.add_argument("--decode-depth", type=int, choices=(1, 2), default=1)
    p.add_argument("--sampled-loss", action="store_true",
                   help="force the sampled reconstruction loss")
    p.add_argument("--neg-per-pos", type=int, default=5)


def _add_model_flags(p):
    p.add_argument("--hidden", type=int, default=32)
    p.add_argument("--dropout", type=_fraction, default=0.5)
    p.add_argument("--lr", type=float, default=0.01)


def _add_finetune_flags(p):
    p.add_argument("--finetune-epochs", type=int, default=DEFAULT_FINETUNE_EPOCHS)
    p.add_argument("--finetune-patience", type=int, default=DEFAULT_FINETUNE_PATIENCE)


_REQUIRED = {
    "pretrain": ("data", "out"),
    "train": ("data", "out"),
    "experiment": ("data", "out"),
    "sweep": ("data", "out"),
    "export": ("data", "init", "out"),
    "validate": ("data",),
}


def build_parser():
    parser = argparse.ArgumentParser(
        prog="sslgcn",
        description="Self-supervised pretraining and semi-supervised "
                    "node classification with a two-layer GCN.")
    sub = parser.add_subparsers(dest="command", required=True)
    subparsers = {}

    p = subparsers["pretrain"] = sub.add_parser(
        "pretrain", help="link-reconstruction pretraining")
    _add_common(p)
    _add_pretrain_flags(p)
    _add_model_flags(p)
    p.add_argument("--out", help="snapshot file to write")

    p = subparsers["train"] = sub.add_parser(
        "train", help="fine-tune / baseline classification")
    _add_common(p)
    _add_model_flags(p)
    _add_finetune_flags(p)
    p.add_argument("--init", help="pretrained snapshot; omit for the baseline")
    p.add_argument("--out", help="output directory")

    p = subparsers["experiment"] = sub.add_parser(
        "experiment", help="multi-seed pipeline runs")
    _add_common(p)
    _add_pretrain_flags(p)
    _add_model_flags(p)
    _add_finetune_flags(p)
    p.add_argument("--no-pretrain", action="store_true",
                   help="baseline: skip the pretraining phase")
    p.add_argument("--runs", type=int, default=10)
    p.add_argument("--base-seed", type=int, default=0)
    p.add_argument("--baseline", help="baseline report JSON for the paired t-test")
    p.add_argument("--jobs", type=int, default=1)
    p.add_argument("--out", help="report JSON to write")

    p = subparsers["sweep"] = sub.add_parser(
        "sweep", help="strategy x percentage grid")
    _add_common(p)
    _add_pretrain_flags(p)
    _add_model_flags(p)
    _add_finetune_flags(p)
    p.add_argument("--percentages", default="0.1,0.2,0.3,0.4,0.5,0.6",
                   help="comma-separated fractions")
    p.add_argument("--strategies", default=",".join(DEFAULT_STRATEGIES))
    p.add_argument("--runs", type=int, default=10)
    p.add_argument("--base-seed", type=int, default=0)
    p.add_argument("--jobs", type=int, default=1)
    p.add_argument("--out", help="output directory")

    p = subparsers["export"] = sub.add_parser(
        "export", help="write hidden representations as TSV")
    _add_common(p)
    p.add_argument("--init", help="snapshot to read theta1 from")
    p.add_argument("--out", help="TSV file to write")

    p = subparsers["validate"] = sub.add_parser(
        "validate", help="check a dataset directory against the published "
                         "benchmark statistics")
    _add_common(p)
    return parser, subparsers


def _cmd_pretrain(args):
    g = load_dataset(_resolve_data_dir(args.data))
    cfg = _pretrain_config(args)
    result = pretrain(g, cfg, args.seed)
    result.snapshot.save(args.out)
    log = {
        "config_fingerprint": config_fingerprint(
            {"command": "pretrain", "data": g.name, "seed": args.seed,
             "pretrain": _jsonable(cfg)}),
        "best_loss": result.best_loss,
        "best_epoch": result.best_epoch,
        "epochs_run": result.epochs_run,
        "loss_history": result.loss_history,
    }
    _write_json(f"{args.out}.log.json", log)
    print(f"pretrain: best loss {result.best_loss:.6f} at epoch "
          f"{result.best_epoch} ({result.epochs_run} epochs); wrote {args.out}")
    return 0


def _jsonable(cfg):
    from dataclasses import asdict

    return json.loads(json.dumps(asdict(cfg), default=str))


def _cmd_train(args):
    g = load_dataset(_resolve_data_dir(args.data))
    if args.init:
        if not os.path.isfile(args.init):
            raise ConfigError(f"snapshot not found: {args.init}")
        snapshot = WeightSnapshot.load(args.init)
    else:
        snapshot = random_snapshot(args.seed)
    cfg = _finetune_config(args)
    result = finetune(g, snapshot, cfg, args.seed)
    os.makedirs(args.out, exist_ok=True)
    model_snapshot = WeightSnapshot(
        tensors={p.name: p.data for p in result.model.parameters()},
        provenance=snapshot.provenance, seed=args.seed)
    model_snapshot.save(os.path.join(args.out, "model.json"))
    metrics = dict(result.metrics)
    metrics["config_fingerprint"] = config_fingerprint(
        {"command": "train", "data": g.name, "seed": args.seed,
         "init": snapshot.provenance, "finetune": _jsonable(cfg)})
    _write_json(os.path.join(args.out, "metrics.json"), metrics)
    print(f"train: test accuracy {metrics.get('test_accuracy')}; wrote {args.out}")
    return 0


def _cmd_experiment(args):
    g = load_dataset(_resolve_data_dir(args.data))
    pre_cfg = None if args.no_pretrain else _pretrain_config(args)
    cfg = ExperimentConfig(pre_cfg, _finetune_config(args))
    baseline = None
    if args.baseline:
        with open(args.baseline, encoding="utf-8") as fh:
            from .train import RunReport

            baseline = RunReport.from_dict(json.load(fh))
    report = run_experiment(g, cfg, n_runs=args.runs, base_seed=args.base_seed,
                            baseline=baseline, jobs=args.jobs)
    _write_json(args.out, report.to_dict())
    line = (f"experiment: mean {report.mean:.4f} +/- {report.std:.4f} "
            f"over {report.n_runs} runs")
    if report.p_value is not None:
        line += f", paired t={report.t_statistic:.3f} p={report.p_value:.3E}"
    print(line + f"; wrote {args.out}")
    return 0


def _cmd_sweep(args):
    g = load_dataset(_resolve_data_dir(args.data))
    percentages = [float(p) for p in str(args.percentages).split(",") if p]
    strategies = [s.strip() for s in str(args.strategies).split(",") if s.strip()]
    for s in strategies:
        if s not in STRATEGY_CHOICES:
            raise ConfigError(f"unknown strategy {s!r}")
    report = sweep(g, _pretrain_config(args), _finetune_config(args),
                   percentages=percentages, strategies=strategies,
                   n_runs=args.runs, base_seed=args.base_seed, jobs=args.jobs)
    os.makedirs(args.out, exist_ok=True)
    _write_json(os.path.join(args.out, "sweep.json"), report.to_dict())
    table = report.render()
    _atomic_write_text(os.path.join(args.out, "sweep.txt"), table + "\n")
    print(table)
    return 0


def _cmd_export(args):
    g = load_dataset(_resolve_data_dir(args.data))
    if not os.path.isfile(args.init):
        raise ConfigError(f"snapshot not found: {args.init}")
    snapshot = WeightSnapshot.load(args.init)
    export_embeddings(snapshot, g, args.out)
    print(f"export: wrote {g.num_nodes} rows to {args.out}")
    return 0


def _cmd_validate(args):
    g = load_dataset(_resolve_data_dir(args.data))
    report = validate_against_reference(g, dataset_meta(g))
    print(report.render())
    return 0


_COMMANDS = {
    "pretrain": _cmd_pretrain,
    "train": _cmd_train,
    "experiment": _cmd_experiment,
    "sweep": _cmd_sweep,
    "export": _cmd_export,
    "validate": _cmd_validate,
}


def main(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser, subparsers = build_parser()
    args = parser.parse_args(argv)
    try:
        if getattr(args, "config", None):
            values = _load_config_file(args.config)
            sub = subparsers[args.command]
            known = {a.dest for a in sub._actions}
            unknown = set(values) - known
            if unknown:
                raise ConfigError(f"unknown config keys: {sorted(unknown)}")
            # file values become defaults, then explicit flags win on re-parse
            sub.set_defaults(**values)
            args = parser.parse_args(argv)
        missing = [f"--{name}" for name in _REQUIRED[args.command]
                   if getattr(args, name, None) in (None, "")]
        if missing:
            subparsers[args.command].print_usage(sys.stderr)
            raise ConfigError(f"missing required arguments: {', '.join(missing)}")
        return _COMMANDS[args.command](args)
    except (ConfigError, UsageError, TransferError, DataFormatError,
            DatasetValidationError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except SslGcnError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())

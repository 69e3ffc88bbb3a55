"""Two-phase training pipeline and the experiment harness.

Phase one (`pretrain`) optimizes the encoder on link reconstruction from
corrupted inputs; phase two (`finetune`) transfers the encoder weights
into a classifier and trains on the labeled split of the uncorrupted
graph. `run_experiment` repeats the pipeline over seeds and aggregates
accuracies; `sweep` grids corruption strategies against percentages and
attaches paired t-tests against the no-pretraining baseline.
"""

from __future__ import annotations

import concurrent.futures
import hashlib
import json
import math
import os
from dataclasses import asdict, dataclass, field

import numpy as np

from .errors import ConfigError, DivergenceError, UsageError
from .graph import Graph, normalize_adjacency
from .model import (GcnClassifier, GcnEncoder, WeightSnapshot, classify_forward,
                    encoder_forward, glorot_init, l2_penalty, masked_cross_entropy,
                    random_snapshot, transfer_weights)
from .optim import AdamState, adam_step
from .rng import Rng
from .ssl_task import (SslConfig, build_ssl_input, link_decoder_logits,
                       sampled_link_loss, weighted_link_loss)
from .tensor import Parameter, Tape, Tensor, add, backward, matmul
from .sparse import spmm


@dataclass
class PretrainConfig:
    ssl: SslConfig
    max_epochs: int = 20000
    patience: int = 5000  # epochs without a new best pretext loss
    lr: float = 0.01
    weight_decay: float = 5e-4
    hidden: int = 32
    dropout: float = 0.5
    decode_depth: int = 1  # 1: decode the hidden layer; 2: extra linear conv first
    neg_per_pos: int = 5
    use_sampled_loss: bool | None = None  # None: sampled only above the densify cap
    resample_each_epoch: bool = False
    l2_all_params: bool = False  # default: penalize theta1 only
    dtype: str = "float32"

    def __post_init__(self):
        if self.max_epochs < 1:
            raise ConfigError(f"max_epochs must be >= 1, got {self.max_epochs}")
        if self.patience > self.max_epochs:
            raise ConfigError(f"patience {self.patience} exceeds max_epochs {self.max_epochs}")
        if self.decode_depth not in (1, 2):
            raise ConfigError(f"decode_depth must be 1 or 2, got {self.decode_depth}")


@dataclass
class FinetuneConfig:
    max_epochs: int = 1000
    patience: int = 100  # epochs without a new best validation loss
    lr: float = 0.01
    weight_decay: float = 5e-4
    hidden: int = 32
    dropout: float = 0.5
    l2_all_params: bool = False  # default: penalize theta1 only
    dtype: str = "float32"

    def __post_init__(self):
        if self.max_epochs < 1:
            raise ConfigError(f"max_epochs must be >= 1, got {self.max_epochs}")
        if self.patience > self.max_epochs:
            raise ConfigError(f"patience {self.patience} exceeds max_epochs {self.max_epochs}")


@dataclass
class PretrainResult:
    snapshot: WeightSnapshot
    best_loss: float
    best_epoch: int
    epochs_run: int
    loss_history: list = field(repr=False, default_factory=list)


@dataclass
class FinetuneResult:
    model: GcnClassifier
    metrics: dict


def pretrain(g: Graph, cfg: PretrainConfig, seed) -> PretrainResult:
    """Train the encoder on link reconstruction; return the weights from
    the epoch with the best pretext loss."""
    rng = Rng(seed)
    dtype = np.dtype(cfg.dtype)
    corrupt_rng = rng.split("corruption")
    ssl_input = build_ssl_input(g, cfg.ssl, rng=corrupt_rng)

    sampled = cfg.use_sampled_loss
    if sampled is None:
        sampled = ssl_input.target_dense is None
    if not sampled and ssl_input.target_dense is None:
        raise ConfigError("full-matrix loss requested but graph exceeds the densify cap")

    enc = GcnEncoder(g.num_features, cfg.hidden, input_dropout=cfg.dropout,
                     hidden_dropout=cfg.dropout, rng=rng.split("layer1"), dtype=dtype)
    params = list(enc.parameters())
    theta_link = None
    if cfg.decode_depth == 2:
        theta_link = Parameter(
            glorot_init((cfg.hidden, cfg.hidden), rng.split("layer-link"), dtype).data,
            name="theta_link")
        params.append(theta_link)

    adam = AdamState(params, lr=cfg.lr)
    drop_rng = rng.split("dropout")
    neg_rng = rng.split("negative-sampling")
    target = None
    if not sampled:
        target = Tensor(ssl_input.target_dense.data.astype(dtype))

    best_loss = math.inf
    best_epoch = -1
    best_tensors = None
    history = []
    epochs_run = 0
    for epoch in range(cfg.max_epochs):
        epochs_run = epoch + 1
        if cfg.resample_each_epoch and epoch > 0:
            # splitting is purely functional, so each epoch needs its own key
            ssl_input = build_ssl_input(g, cfg.ssl, rng=corrupt_rng.split(epoch))
        tape = Tape()
        h = encoder_forward(enc, ssl_input.corrupted_features,
                            ssl_input.corrupted_adjacency, drop_rng, True, tape)
        if theta_link is not None:
            h = spmm(ssl_input.corrupted_adjacency.matrix,
                     matmul(h, theta_link, tape), tape)
        if sampled:
            loss = sampled_link_loss(h, g, cfg.neg_per_pos, neg_rng, tape,
                                     pos_weight=ssl_input.positive_weight)
        else:
            logits = link_decoder_logits(h, tape)
            loss = weighted_link_loss(logits, target, ssl_input.positive_weight, tape)
        if cfg.weight_decay:
            penalized = params if cfg.l2_all_params else [enc.theta1]
            loss = add(loss, l2_penalty(penalized, cfg.weight_decay, tape), tape)
        value = loss.item()
        if not math.isfinite(value):
            raise DivergenceError(epoch)
        history.append(value)
        if value < best_loss:
            best_loss = value
            best_epoch = epoch
            best_tensors = {p.name: p.data.copy() for p in params}
        elif epoch - best_epoch >= cfg.patience:
            break
        backward(loss, tape)
        adam_step(params, adam)

    snapshot = WeightSnapshot(tensors=best_tensors, provenance="pretrained", seed=int(seed))
    return PretrainResult(snapshot=snapshot, best_loss=best_loss,
                          best_epoch=best_epoch, epochs_run=epochs_run,
                          loss_history=history)


def finetune(g: Graph, init: WeightSnapshot, cfg: FinetuneConfig, seed) -> FinetuneResult:
    """Transfer `init` into a fresh classifier and train on the labeled
    split of the uncorrupted graph, restoring the best-validation epoch."""
    rng = Rng(seed)
    dtype = np.dtype(cfg.dtype)
    adj = normalize_adjacency(g)
    model = GcnClassifier(g.num_features, g.num_classes, cfg.hidden,
                          input_dropout=cfg.dropout, hidden_dropout=cfg.dropout,
                          rng=rng.split("init"), dtype=dtype)
    transfer_report = transfer_weights(init, model)
    params = model.parameters()
    adam = AdamState(params, lr=cfg.lr)
    drop_rng = rng.split("dropout")
    features = g.features

    monitor_nodes = g.val_nodes if len(g.val_nodes) else g.train_nodes

    best_loss = math.inf
    best_epoch = -1
    best_tensors = None
    epochs_run = 0
    for epoch in range(cfg.max_epochs):
        epochs_run = epoch + 1
        tape = Tape()
        z = classify_forward(model, features, adj, drop_rng, True, tape)
        loss = masked_cross_entropy(z, g.labels, g.train_nodes, tape)
        if cfg.weight_decay:
            penalized = params if cfg.l2_all_params else [model.encoder.theta1]
            loss = add(loss, l2_penalty(penalized, cfg.weight_decay, tape), tape)
        if not math.isfinite(loss.item()):
            raise DivergenceError(epoch)
        backward(loss, tape)
        adam_step(params, adam)

        z_eval = classify_forward(model, features, adj, None, False, None)
        monitor_loss = masked_cross_entropy(z_eval, g.labels, monitor_nodes, None).item()
        if not math.isfinite(monitor_loss):
            raise DivergenceError(epoch, "non-finite validation loss")
        if monitor_loss < best_loss:
            best_loss = monitor_loss
            best_epoch = epoch
            best_tensors = {p.name: p.data.copy() for p in params}
        elif epoch - best_epoch >= cfg.patience:
            break

    for p in params:
        p.data[...] = best_tensors[p.name]

    metrics = {
        "best_val_loss": best_loss,
        "best_epoch": best_epoch,
        "epochs_run": epochs_run,
        "provenance": init.provenance,
        "transferred": transfer_report.transferred,
        "train_accuracy": evaluate_accuracy(model, g, "train", adj=adj),
        "test_accuracy": evaluate_accuracy(model, g, "test", adj=adj)
        if len(g.test_nodes) else None,
    }
    if len(g.val_nodes):
        metrics["val_accuracy"] = evaluate_accuracy(model, g, "val", adj=adj)
    return FinetuneResult(model=model, metrics=metrics)


def evaluate_accuracy(model: GcnClassifier, g: Graph, split="test", adj=None) -> float:
    """Fraction of split nodes whose argmax class matches the label.
    Ties break toward the lowest class index, so the result is
    deterministic."""
    nodes = {"train": g.train_nodes, "val": g.val_nodes, "test": g.test_nodes}.get(split)
    if nodes is None:
        raise UsageError(f"unknown split {split!r}")
    if len(nodes) == 0:
        raise UsageError(f"split {split!r} is empty")
    if adj is None:
        adj = normalize_adjacency(g)
    z = classify_forward(model, g.features, adj, None, False, None)
    predicted = np.argmax(z.data[nodes], axis=1)  # first maximum wins
    return float(np.mean(predicted == g.labels[nodes]))


# ---------------------------------------------------------------------------
# experiment harness


@dataclass
class ExperimentConfig:
    pretrain: PretrainConfig | None  # None: no-pretraining baseline
    finetune: FinetuneConfig


def config_fingerprint(payload: dict) -> str:
    canonical = json.dumps(payload, sort_keys=True, separators=(",", ":"), default=str)
    return hashlib.sha256(canonical.encode("utf-8")).hexdigest()[:16]


def _experiment_payload(g: Graph, cfg: ExperimentConfig, n_runs, base_seed) -> dict:
    return {
        "dataset": {"name": g.name, "num_nodes": g.num_nodes, "num_edges": g.num_edges},
        "pretrain": asdict(cfg.pretrain) if cfg.pretrain else None,
        "finetune": asdict(cfg.finetune),
        "n_runs": n_runs,
        "base_seed": base_seed,
    }


@dataclass
class RunReport:
    accuracies: list
    mean: float
    std: float  # sample standard deviation (n-1)
    n_runs: int
    base_seed: int
    config_fingerprint: str
    run_metrics: list = field(default_factory=list)
    baseline_fingerprint: str | None = None
    t_statistic: float | None = None
    p_value: float | None = None

    def to_dict(self) -> dict:
        return {
            "accuracies": self.accuracies,
            "mean": self.mean,
            "std": self.std,
            "n_runs": self.n_runs,
            "base_seed": self.base_seed,
            "config_fingerprint": self.config_fingerprint,
            "run_metrics": self.run_metrics,
            "baseline_fingerprint": self.baseline_fingerprint,
            "t_statistic": self.t_statistic,
            "p_value": self.p_value,
        }

    @classmethod
    def from_dict(cls, body) -> "RunReport":
        return cls(**body)


def _single_run(g: Graph, cfg: ExperimentConfig, seed):
    if cfg.pretrain is not None:
        snapshot = pretrain(g, cfg.pretrain, seed).snapshot
    else:
        snapshot = random_snapshot(seed)
    result = finetune(g, snapshot, cfg.finetune, seed)
    return result.metrics


def run_experiment(g: Graph, cfg: ExperimentConfig, n_runs=10, base_seed=0,
                   baseline: RunReport | None = None, jobs=1) -> RunReport:
    """Repeat pretrain(optional)+finetune over `n_runs` seeds
    (base_seed + i). When a baseline report is given, runs are paired by
    seed index for a two-tailed paired t-test."""
    if n_runs < 2:
        raise ConfigError(f"n_runs must be >= 2, got {n_runs}")
    seeds = [base_seed + i for i in range(n_runs)]
    if jobs > 1:
        with concurrent.futures.ThreadPoolExecutor(max_workers=jobs) as pool:
            metrics = list(pool.map(lambda s: _single_run(g, cfg, s), seeds))
    else:
        metrics = [_single_run(g, cfg, s) for s in seeds]

    accuracies = [m["test_accuracy"] for m in metrics]
    if any(a is None for a in accuracies):
        raise UsageError("run_experiment needs a nonempty test split")
    mean = math.fsum(accuracies) / n_runs
    var = math.fsum((a - mean) ** 2 for a in accuracies) / (n_runs - 1)
    report = RunReport(
        accuracies=accuracies,
        mean=mean,
        std=math.sqrt(var),
        n_runs=n_runs,
        base_seed=base_seed,
        config_fingerprint=config_fingerprint(_experiment_payload(g, cfg, n_runs, base_seed)),
        run_metrics=[{k: v for k, v in m.items() if k != "transferred"} for m in metrics],
    )
    if baseline is not None:
        from .errors import DegenerateInputError
        from .stats import paired_t_test

        if len(baseline.accuracies) != n_runs:
            raise UsageError(
                f"baseline has {len(baseline.accuracies)} runs, expected {n_runs}")
        report.baseline_fingerprint = baseline.config_fingerprint
        try:
            t, p = paired_t_test(accuracies, baseline.accuracies)
        except DegenerateInputError:
            # every seed tied exactly; no statistic to report
            t = p = None
        report.t_statistic = t
        report.p_value = p
    return report


# ---------------------------------------------------------------------------
# corruption sweep


DEFAULT_PERCENTAGES = (0.1, 0.2, 0.3, 0.4, 0.5, 0.6)
DEFAULT_STRATEGIES = ("rrl", "rcf", "both")


@dataclass
class SweepReport:
    baseline: RunReport
    cells: list  # [{"strategy", "percentage", "report"}]

    def to_dict(self) -> dict:
        return {
            "baseline": self.baseline.to_dict(),
            "cells": [
                {"strategy": c["strategy"], "percentage": c["percentage"],
                 "report": c["report"].to_dict()}
                for c in self.cells
            ],
        }

    def render(self) -> str:
        lines = [
            f"{'':>5} {'strategy':<10} {'ACC[%]':>8} {'P-Value':>10}",
            f"{'':>5} {'no pretraining':<10} {100 * self.baseline.mean:8.2f} {'---':>10}",
        ]
        for cell in self.cells:
            rep = cell["report"]
            p_text = "---" if rep.p_value is None else f"{rep.p_value:.1E}"
            lines.append(
                f"{100 * cell['percentage']:4.0f}% {cell['strategy']:<10} "
                f"{100 * rep.mean:8.2f} {p_text:>10}"
            )
        return "\n".join(lines)


def sweep(g: Graph, pretrain_template: PretrainConfig, finetune_cfg: FinetuneConfig,
          percentages=DEFAULT_PERCENTAGES, strategies=DEFAULT_STRATEGIES,
          n_runs=10, base_seed=0, jobs=1) -> SweepReport:
    """Grid of corruption strategy x percentage, each cell a full
    multi-run experiment paired against the shared baseline."""
    from dataclasses import replace

    from .ssl_task import Strategy

    baseline = run_experiment(g, ExperimentConfig(None, finetune_cfg),
                              n_runs=n_runs, base_seed=base_seed, jobs=jobs)
    cells = []
    for pct in percentages:
        for strat in strategies:
            strat = Strategy(strat)
            ssl_cfg = SslConfig(
                strategy=strat,
                removal_fraction=pct if strat.removes_links else 0.0,
                cover_fraction=pct if strat.covers_features else 0.0,
                seed=pretrain_template.ssl.seed,
                cover_all_entries=pretrain_template.ssl.cover_all_entries,
            )
            cell_cfg = ExperimentConfig(
                replace(pretrain_template, ssl=ssl_cfg), finetune_cfg)
            report = run_experiment(g, cell_cfg, n_runs=n_runs, base_seed=base_seed,
                                    baseline=baseline, jobs=jobs)
            cells.append({"strategy": strat.value, "percentage": pct, "report": report})
    return SweepReport(baseline=baseline, cells=cells)


# ---------------------------------------------------------------------------
# embedding export


def export_embeddings(source, g: Graph, out_path):
    """Write hidden representations as TSV: node, label, then one column
    per hidden unit. `source` may be a classifier, an encoder, or a
    snapshot containing theta1. Dropout is off; re-export is
    byte-identical."""
    if isinstance(source, GcnClassifier):
        enc = source.encoder
    elif isinstance(source, GcnEncoder):
        enc = source
    elif isinstance(source, WeightSnapshot):
        theta1 = source.tensors.get("theta1")
        if theta1 is None:
            raise UsageError("snapshot has no theta1 tensor to export from")
        enc = GcnEncoder(theta1.shape[0], hidden=theta1.shape[1],
                         rng=Rng(0), dtype=theta1.dtype)
        enc.theta1.data[...] = theta1
    else:
        raise UsageError(f"cannot export embeddings from {type(source).__name__}")
    adj = normalize_adjacency(g)
    h = encoder_forward(enc, g.features, adj, None, False, None)
    tmp = f"{out_path}.tmp"
    with open(tmp, "w", encoding="utf-8") as fh:
        for node in range(g.num_nodes):
            vals = "\t".join(repr(float(v)) for v in h.data[node])
            fh.write(f"{node}\t{g.labels[node]}\t{vals}\n")
    os.replace(tmp, out_path)
    return h

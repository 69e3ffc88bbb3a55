"""Acceptance suite: one test per release criterion, each printing a
PASS/FAIL line (run with -s to see the lines for passing tests).

The citation-benchmark criteria need pre-converted dataset directories
under data/{cora,citeseer,pubmed}; they skip with an explanatory message
when those are not checked out (see README for how to produce them with
the converter).
"""

import time

import numpy as np
import pytest
import scipy.stats

from conftest import make_graph, require_dataset
from oracles import (dense_gcn_forward, dense_normalized_adjacency,
                     finite_difference_grad, naive_weighted_bce,
                     random_edge_set, relative_error)
from sslgcn.cli import main as cli_main
from sslgcn.data_io import load_dataset
from sslgcn.graph import adjacency_dense, normalize_adjacency
from sslgcn.model import (GcnClassifier, classify_forward, l2_penalty,
                          masked_cross_entropy)
from sslgcn.rng import Rng
from sslgcn.ssl_task import (SslConfig, link_decoder_logits, positive_weight,
                             sampled_link_loss, weighted_link_loss)
from sslgcn.stats import paired_t_test
from sslgcn.tensor import (Parameter, Tape, Tensor, add, add_row, backward,
                           dropout, elu, matmul, mean_all, relu, scale,
                           sigmoid, softmax_rows, square, sum_all)
from sslgcn.sparse import SparseMatrix, spmm
from sslgcn.train import (ExperimentConfig, FinetuneConfig, PretrainConfig,
                          run_experiment, sweep)

GRAD_TOL = 1e-4
N_GRAD_INSTANCES = 20


def report(name, ok, detail=""):
    status = "PASS" if ok else "FAIL"
    print(f"ACCEPTANCE [{name}]: {status}  {detail}".rstrip(), flush=True)
    assert ok, f"{name}: {detail}"


def check_grad(build, x0, rtol=GRAD_TOL):
    p = Parameter(x0, name="x", dtype=np.float64)
    tape = Tape()
    backward(build(p, tape), tape)

    def f(arr):
        return build(Tensor(arr, dtype=np.float64), None).item()

    want = finite_difference_grad(f, x0)
    err = relative_error(p.grad, want)
    assert err <= rtol, f"gradient error {err:.3e}"


class TestGradientSuite:
    def test_every_differentiable_op_and_both_losses(self):
        start = time.monotonic()
        rng = np.random.default_rng(0)

        def away_from_kinks(shape, margin=0.15):
            x = rng.normal(size=shape)
            return np.where(np.abs(x) < margin, margin + np.abs(x), x)

        cases = 0
        for i in range(N_GRAD_INSTANCES):
            r = int(rng.integers(2, 6))
            c = int(rng.integers(2, 6))
            k = int(rng.integers(2, 6))
            other = Tensor(rng.normal(size=(c, k)), dtype=np.float64)
            same = Tensor(rng.normal(size=(r, c)), dtype=np.float64)
            sp = SparseMatrix.from_dense(
                np.where(rng.random((k, r)) < 0.5, rng.normal(size=(k, r)), 0.0))
            rowvec = rng.normal(size=(1, c))
            seeded = Rng(100 + i)

            op_builders = [
                (lambda p, t: sum_all(matmul(p, other, t), t), (r, c)),
                (lambda p, t: mean_all(square(spmm(sp, p, t), t), t), (r, c)),
                (lambda p, t: sum_all(square(add(p, same, t), t), t), (r, c)),
                (lambda p, t: sum_all(square(add_row(p, Tensor(rowvec, dtype=np.float64), t), t), t), (r, c)),
                (lambda p, t: scale(sum_all(square(p, t), t), 0.73, t), (r, c)),
                (lambda p, t: mean_all(square(relu(p, t), t), t), "kink"),
                (lambda p, t: mean_all(square(elu(p, t), t), t), "kink"),
                (lambda p, t: mean_all(square(sigmoid(p, t), t), t), (r, c)),
                (lambda p, t: mean_all(square(softmax_rows(p, t), t), t), (r, c)),
                (lambda p, t: sum_all(dropout(p, 0.4, Rng(9 + i), True, t), t), (r, c)),
            ]
            for build, shape in op_builders:
                x0 = away_from_kinks((r, c)) if shape == "kink" else rng.normal(size=(r, c))
                check_grad(build, x0)
                cases += 1

            # classification loss (through softmax) and reconstruction loss
            # (through the decoder)
            labels = rng.integers(0, c, size=r)
            mask = np.arange(r)

            def class_loss(p, t):
                return masked_cross_entropy(softmax_rows(p, t), labels, mask, t)

            check_grad(class_loss, rng.normal(size=(r, c)))
            cases += 1

            target_arr = (rng.random((r, r)) < 0.4).astype(float)
            np.fill_diagonal(target_arr, 0.0)
            target_arr = np.maximum(target_arr, target_arr.T)
            target = Tensor(target_arr, dtype=np.float64)

            def link_loss(p, t):
                return weighted_link_loss(link_decoder_logits(p, t), target, 3.0, t)

            check_grad(link_loss, rng.normal(size=(r, 3)))
            cases += 1

            edges = random_edge_set(rng, 6, 0.5)
            if len(edges):
                g = make_graph(6, edges, labels=np.zeros(6, dtype=np.int64).tolist(),
                               train=[0], val=[], test=[], seed=i)

                def samp_loss(p, t, g=g, s=seeded):
                    return sampled_link_loss(p, g, 3, Rng(777 + i), t)

                check_grad(samp_loss, rng.normal(size=(6, 3)))
                cases += 1

        elapsed = time.monotonic() - start
        report("gradient-suite", elapsed < 30.0,
               f"{cases} randomized checks, rel err <= {GRAD_TOL}, {elapsed:.1f}s")

    def test_l2_gradient(self):
        rng = np.random.default_rng(1)
        for _ in range(N_GRAD_INSTANCES):
            theta0 = rng.normal(size=(3, 4))
            p = Parameter(theta0, name="p", dtype=np.float64)
            tape = Tape()
            backward(l2_penalty([p], 5e-4, tape), tape)
            want = finite_difference_grad(
                lambda arr: 5e-4 * float((np.asarray(arr) ** 2).sum()), theta0)
            assert relative_error(p.grad, want) <= GRAD_TOL
        report("gradient-suite-l2", True, f"{N_GRAD_INSTANCES} instances")


class TestOracleEquivalence:
    def test_sparse_forward_matches_dense_reference(self):
        start = time.monotonic()
        rng = np.random.default_rng(2)
        worst = 0.0
        for trial in range(50):
            n = int(rng.integers(2, 21))
            edges = random_edge_set(rng, n, rng.uniform(0.1, 0.5))
            g = make_graph(n, edges, n_features=5, n_classes=3, seed=trial,
                           labels=rng.integers(0, 3, size=n),
                           train=[0], val=[], test=[])
            m = GcnClassifier(5, 3, hidden=6, rng=Rng(trial), dtype=np.float64)
            got = classify_forward(m, g.features, normalize_adjacency(g),
                                   None, False, None).data
            adj_ref = dense_normalized_adjacency(n, edges)
            want, want_hidden = dense_gcn_forward(
                adj_ref, g.features.to_dense(), m.encoder.theta1.data, m.theta2.data)
            worst = max(worst, float(np.abs(got - want).max()))
            assert np.abs(got - want).max() <= 1e-10
        elapsed = time.monotonic() - start
        report("oracle-equivalence", elapsed < 10.0,
               f"50 graphs, max abs diff {worst:.2e} <= 1e-10, {elapsed:.1f}s")


class TestLossOracles:
    def test_weighted_loss_matches_naive(self):
        rng = np.random.default_rng(3)
        worst = 0.0
        for _ in range(50):
            n = int(rng.integers(2, 12))
            logits = rng.normal(size=(n, n), scale=4)
            target = (rng.random((n, n)) < 0.35).astype(float)
            w = float(rng.uniform(0.5, 50))
            got = weighted_link_loss(Tensor(logits, dtype=np.float64),
                                     Tensor(target, dtype=np.float64), w, None).item()
            want = naive_weighted_bce(logits, target, w)
            worst = max(worst, abs(got - want))
            assert abs(got - want) <= 1e-6
        report("loss-oracle-weighted-bce", True, f"max abs diff {worst:.2e} <= 1e-6")

    def test_positive_weight_exact_on_100_graphs(self):
        rng = np.random.default_rng(4)
        checked = 0
        while checked < 100:
            n = int(rng.integers(2, 40))
            edges = random_edge_set(rng, n, rng.uniform(0.05, 0.9))
            if len(edges) == 0:
                continue
            g = make_graph(n, edges, labels=np.zeros(n, dtype=np.int64).tolist(),
                           train=[0], val=[], test=[], seed=checked)
            nnz = 2 * len(edges)
            assert positive_weight(g) == (n * n - nnz) / nnz
            checked += 1
        report("loss-oracle-positive-weight", True, "100 graphs, exact")

    def test_sampled_loss_expectation_within_two_percent(self):
        rng = np.random.default_rng(5)
        g = make_graph(14, random_edge_set(rng, 14, 0.3),
                       labels=np.zeros(14, dtype=np.int64).tolist(),
                       train=[0], val=[], test=[], seed=99)
        h = Tensor(rng.normal(size=(14, 5), scale=0.7), dtype=np.float64)
        full = weighted_link_loss(link_decoder_logits(h, None), adjacency_dense(g),
                                  positive_weight(g), None).item()
        estimates = [sampled_link_loss(h, g, 8, Rng(40000 + k), None).item()
                     for k in range(400)]
        rel = abs(np.mean(estimates) - full) / full
        report("loss-oracle-sampled", rel <= 0.02,
               f"relative gap {rel:.4f} <= 0.02 over 400 draws")


class TestTTestVerification:
    def test_twenty_random_paired_samples_match_reference(self):
        rng = np.random.default_rng(6)
        for trial in range(20):
            n = int(rng.integers(3, 25))
            a = rng.normal(size=n)
            b = a + rng.normal(scale=0.4, size=n) + rng.uniform(-0.8, 0.8)
            t, p = paired_t_test(a.tolist(), b.tolist())
            ref = scipy.stats.ttest_rel(a, b)
            for got, want in ((t, float(ref.statistic)), (p, float(ref.pvalue))):
                assert abs(got - want) <= abs(want) * 5e-4, (trial, got, want)
        report("t-test-verification", True, "20 cases, 4 significant figures")


class TestDeterminism:
    def test_repeated_commands_bitwise_identical(self, blocks_dir, tmp_path):
        fast = ["--epochs", "12", "--patience", "12", "--hidden", "8"]
        snap_args = ["pretrain", "--data", blocks_dir, "--seed", "3"] + fast
        a, b = tmp_path / "a.json", tmp_path / "b.json"
        assert cli_main(snap_args + ["--out", str(a)]) == 0
        assert cli_main(snap_args + ["--out", str(b)]) == 0
        snap_ok = a.read_bytes() == b.read_bytes()

        exp_args = ["experiment", "--data", blocks_dir, "--no-pretrain",
                    "--runs", "2", "--base-seed", "1", "--hidden", "8",
                    "--finetune-epochs", "20", "--finetune-patience", "20"]
        ra, rb = tmp_path / "ra.json", tmp_path / "rb.json"
        assert cli_main(exp_args + ["--out", str(ra)]) == 0
        assert cli_main(exp_args + ["--out", str(rb)]) == 0
        rep_ok = ra.read_bytes() == rb.read_bytes()

        ea, eb = tmp_path / "ea.tsv", tmp_path / "eb.tsv"
        assert cli_main(["export", "--data", blocks_dir, "--init", str(a),
                         "--out", str(ea)]) == 0
        assert cli_main(["export", "--data", blocks_dir, "--init", str(a),
                         "--out", str(eb)]) == 0
        exp_ok = ea.read_bytes() == eb.read_bytes()

        report("determinism", snap_ok and rep_ok and exp_ok,
               "snapshot, report, and export files byte-identical on repeat")


# ---------------------------------------------------------------------------
# citation-benchmark criteria (need pre-converted dataset directories)


def benchmark_configs(hidden=32):
    finetune_cfg = FinetuneConfig(max_epochs=400, patience=50, hidden=hidden)
    pretrain_cfg = PretrainConfig(
        ssl=SslConfig(strategy="both", removal_fraction=0.4, cover_fraction=0.4),
        max_epochs=200, patience=200, hidden=hidden)
    return pretrain_cfg, finetune_cfg


class TestCora:
    def test_baseline_reproduction(self):
        path = require_dataset("cora")
        g = load_dataset(path)
        start = time.monotonic()
        _, fcfg = benchmark_configs()
        rep = run_experiment(g, ExperimentConfig(None, fcfg), n_runs=10, base_seed=0)
        elapsed = time.monotonic() - start
        ok = 0.800 <= rep.mean <= 0.830 and elapsed <= 300
        report("cora-baseline", ok,
               f"mean {rep.mean:.4f} in [0.800, 0.830], {elapsed:.0f}s <= 300s")

    def test_ssl_improvement_and_significance(self):
        path = require_dataset("cora")
        g = load_dataset(path)
        start = time.monotonic()
        pcfg, fcfg = benchmark_configs()
        baseline = run_experiment(g, ExperimentConfig(None, fcfg),
                                  n_runs=10, base_seed=0)
        ssl_rep = run_experiment(g, ExperimentConfig(pcfg, fcfg), n_runs=10,
                                 base_seed=0, baseline=baseline)
        elapsed = time.monotonic() - start
        improved = ssl_rep.mean > baseline.mean
        significant = ssl_rep.p_value is not None and ssl_rep.p_value < 0.05
        in_band = abs(ssl_rep.mean - 0.838) <= 0.015
        if improved and significant and not in_band:
            print(f"ACCEPTANCE [cora-ssl]: SOFT-FAIL band  mean {ssl_rep.mean:.4f} "
                  f"outside 0.838 +/- 0.015 (improvement and significance hold; "
                  f"several training choices are under-specified upstream - "
                  f"investigate before release)", flush=True)
        report("cora-ssl", improved and significant and elapsed <= 900,
               f"ssl {ssl_rep.mean:.4f} > baseline {baseline.mean:.4f}, "
               f"p {ssl_rep.p_value}, band hit: {in_band}, {elapsed:.0f}s <= 900s")

    def test_sweep_sanity_reduced_grid(self):
        path = require_dataset("cora")
        g = load_dataset(path)
        start = time.monotonic()
        pcfg, fcfg = benchmark_configs()
        rep = sweep(g, pcfg, fcfg, percentages=(0.1, 0.4),
                    strategies=("rrl", "rcf", "both"), n_runs=10, base_seed=0)
        elapsed = time.monotonic() - start
        floor = rep.baseline.mean - 0.003
        bad = [(c["strategy"], c["percentage"], c["report"].mean)
               for c in rep.cells if c["report"].mean < floor]
        report("cora-sweep-sanity", not bad and elapsed <= 3600,
               f"6 cells all >= baseline-0.3% ({rep.baseline.mean:.4f}), "
               f"{elapsed:.0f}s <= 3600s; below floor: {bad}")


class TestCiteseer:
    def test_baseline_and_ssl(self):
        path = require_dataset("citeseer")
        g = load_dataset(path)
        start = time.monotonic()
        pcfg, fcfg = benchmark_configs()
        baseline = run_experiment(g, ExperimentConfig(None, fcfg),
                                  n_runs=10, base_seed=0)
        ssl_rep = run_experiment(g, ExperimentConfig(pcfg, fcfg), n_runs=10,
                                 base_seed=0, baseline=baseline)
        elapsed = time.monotonic() - start
        base_ok = 0.688 <= baseline.mean <= 0.718
        improved = ssl_rep.mean > baseline.mean
        in_band = abs(ssl_rep.mean - 0.7295) <= 0.015
        if improved and base_ok and not in_band:
            print(f"ACCEPTANCE [citeseer]: SOFT-FAIL band  mean {ssl_rep.mean:.4f} "
                  f"outside 0.7295 +/- 0.015 (baseline band and improvement hold)",
                  flush=True)
        report("citeseer", base_ok and improved and elapsed <= 1200,
               f"baseline {baseline.mean:.4f} in [0.688, 0.718], "
               f"ssl {ssl_rep.mean:.4f} above, band hit: {in_band}, "
               f"{elapsed:.0f}s <= 1200s")


class TestPubmedStretch:
    @pytest.mark.xfail(strict=False,
                       reason="stretch criterion: large graph, sampled loss; "
                              "failure does not block release")
    def test_baseline_and_directional_ssl(self):
        path = require_dataset("pubmed")
        g = load_dataset(path)
        pcfg, fcfg = benchmark_configs()
        pcfg.use_sampled_loss = True
        baseline = run_experiment(g, ExperimentConfig(None, fcfg),
                                  n_runs=10, base_seed=0)
        ssl_rep = run_experiment(g, ExperimentConfig(pcfg, fcfg), n_runs=10,
                                 base_seed=0, baseline=baseline)
        base_ok = 0.775 <= baseline.mean <= 0.805
        report("pubmed-stretch", base_ok and ssl_rep.mean > baseline.mean,
               f"baseline {baseline.mean:.4f} in [0.775, 0.805], "
               f"ssl {ssl_rep.mean:.4f} directionally above")

"""End-to-end check that link-reconstruction pretraining helps where it
should: the `community` fixture has heavily overlapping class
vocabularies (weak features) and only four labeled nodes per class, so
the structure signal learned in pretraining has headroom to improve
classification. Fully seeded, so the outcome is deterministic for a
given numpy build."""

import os

import pytest

from conftest import FIXTURES
from sslgcn.data_io import load_dataset
from sslgcn.ssl_task import SslConfig
from sslgcn.train import (ExperimentConfig, FinetuneConfig, PretrainConfig,
                          run_experiment)


@pytest.fixture(scope="module")
def community_graph():
    return load_dataset(os.path.join(FIXTURES, "community"))


def test_pretraining_improves_scarce_label_classification(community_graph):
    g = community_graph
    fcfg = FinetuneConfig(max_epochs=300, patience=30)
    pcfg = PretrainConfig(
        ssl=SslConfig(strategy="both", removal_fraction=0.4, cover_fraction=0.4),
        max_epochs=200, patience=200)
    baseline = run_experiment(g, ExperimentConfig(None, fcfg),
                              n_runs=10, base_seed=0)
    ssl = run_experiment(g, ExperimentConfig(pcfg, fcfg), n_runs=10,
                         base_seed=0, baseline=baseline)
    print(f"community fixture: baseline {baseline.mean:.4f} +/- {baseline.std:.4f}, "
          f"pretrained {ssl.mean:.4f} +/- {ssl.std:.4f}, "
          f"t={ssl.t_statistic:.3f} p={ssl.p_value:.3e}")
    assert ssl.mean > baseline.mean
    assert ssl.p_value < 0.05

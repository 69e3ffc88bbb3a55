import os

import numpy as np
import pytest

from sslgcn.graph import Graph
from sslgcn.sparse import SparseMatrix

REPO_ROOT = os.path.dirname(os.path.dirname(os.path.abspath(__file__)))
FIXTURES = os.path.join(REPO_ROOT, "data", "fixtures")
DATASETS = os.path.join(REPO_ROOT, "data")


def dataset_dir(name):
    """Path to a pre-converted dataset directory, or None if absent."""
    path = os.path.join(DATASETS, name)
    return path if os.path.isfile(os.path.join(path, "meta.json")) else None


def require_dataset(name):
    path = dataset_dir(name)
    if path is None:
        pytest.skip(f"pre-converted dataset directory data/{name} not present "
                    f"in this checkout (see README: converting the citation "
                    f"benchmarks requires their original distribution files)")
    return path


@pytest.fixture(scope="session")
def tiny_dir():
    return os.path.join(FIXTURES, "tiny")


@pytest.fixture(scope="session")
def blocks_dir():
    return os.path.join(FIXTURES, "blocks")


@pytest.fixture(scope="session")
def blocks_graph(blocks_dir):
    from sslgcn.data_io import load_dataset

    return load_dataset(blocks_dir)


def make_graph(n, edges, n_features=3, n_classes=2, seed=0,
               train=None, val=None, test=None, labels=None):
    """Small dense-featured graph for unit tests."""
    rng = np.random.default_rng(seed)
    rows, cols, vals = [], [], []
    for node in range(n):
        nnz = rng.integers(1, n_features + 1)
        chosen = rng.choice(n_features, size=nnz, replace=False)
        for c in chosen:
            rows.append(node)
            cols.append(int(c))
            vals.append(float(rng.uniform(0.5, 1.5)))
    features = SparseMatrix.from_coo(n, n_features, rows, cols, vals)
    if labels is None:
        labels = rng.integers(0, n_classes, size=n)
    return Graph(n, edges, features, labels,
                 train if train is not None else np.arange(min(2, n)),
                 val if val is not None else [],
                 test if test is not None else [],
                 name="unit")


@pytest.fixture
def path3_graph():
    return make_graph(3, [[0, 1], [1, 2]], labels=[0, 1, 0],
                      train=[0], val=[1], test=[2])

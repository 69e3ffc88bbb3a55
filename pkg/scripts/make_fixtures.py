#!/usr/bin/env python3
"""Regenerate the checked-in fixture datasets under data/fixtures/.

Three datasets are produced deterministically:

  tiny       the 2-node minimal directory used by the loader tests
  blocks     a 400-node synthetic citation-style graph: four communities
             with dense in-community links and class-correlated
             bag-of-words features, split planetoid-style (20 labeled
             nodes per class, 100 validation, 200 test)
  community  a harder 480-node variant: six communities whose word pools
             overlap heavily (weak features) and only 4 labeled nodes
             per class, leaving headroom for link-reconstruction
             pretraining to help

Run from the repository root: python scripts/make_fixtures.py
"""

import os
import sys

import numpy as np

sys.path.insert(0, os.path.join(os.path.dirname(__file__), "..", "src"))

from sslgcn.data_io import store_dataset  # noqa: E402
from sslgcn.graph import Graph  # noqa: E402
from sslgcn.rng import Rng  # noqa: E402
from sslgcn.sparse import SparseMatrix  # noqa: E402

OUT_ROOT = os.path.join(os.path.dirname(__file__), "..", "data", "fixtures")


def make_tiny():
    features = SparseMatrix.from_coo(2, 1, [0, 1], [0, 0], [1.0, 1.0])
    return Graph(2, [[0, 1]], features, [0, 1], [0], [], [1], name="tiny")


def make_blocks(n_classes=4, per_class=100, n_features=128, words_per_class=24,
                p_within=0.03, p_across=0.002, seed=20240601):
    rng = Rng(seed)
    n = n_classes * per_class
    labels = np.repeat(np.arange(n_classes), per_class)

    # class-correlated bag of words: each class owns a word pool, nodes
    # draw mostly from their pool plus a little noise
    pool_rng = rng.split("pools")
    pools = [pool_rng.choice_without_replacement(n_features, words_per_class)
             for _ in range(n_classes)]
    feat_rng = rng.split("features")
    rows, cols = [], []
    for node in range(n):
        pool = pools[labels[node]]
        n_own = 8 + int(feat_rng.integers(0, 5))
        own = pool[feat_rng.choice_without_replacement(len(pool), n_own)]
        noise = feat_rng.choice_without_replacement(n_features, 3)
        words = np.unique(np.concatenate([own, noise]))
        rows.extend([node] * len(words))
        cols.extend(words.tolist())
    features = SparseMatrix.from_coo(n, n_features, rows, cols,
                                     np.ones(len(rows)))

    edge_rng = rng.split("edges")
    draw = edge_rng.random((n, n))
    same = labels[:, None] == labels[None, :]
    prob = np.where(same, p_within, p_across)
    upper = np.triu(draw < prob, k=1)
    u, v = np.nonzero(upper)
    edges = np.stack([u, v], axis=1)

    split_rng = rng.split("splits")
    order = split_rng.permutation(n)
    train = []
    for c in range(n_classes):
        members = order[labels[order] == c]
        train.extend(members[:20].tolist())
    train = np.sort(np.asarray(train))
    rest = np.asarray([i for i in order if i not in set(train.tolist())])
    val = np.sort(rest[:100])
    test = np.sort(rest[100:300])
    return Graph(n, edges, features, labels, train, val, test, name="blocks")


def make_community(n_classes=6, per_class=80, n_features=200, pool_size=14,
                   shared_vocab=30, own_lo=3, own_hi=6, n_noise=5,
                   p_within=0.030, p_across=0.0035, labels_per_class=4,
                   seed=0):
    rng = Rng(seed)
    n = n_classes * per_class
    labels = np.repeat(np.arange(n_classes), per_class)

    # pools drawn from one small shared region, so vocabulary overlaps
    # across classes and features alone are a weak signal
    pool_rng = rng.split("pools")
    pools = [pool_rng.choice_without_replacement(shared_vocab, pool_size)
             for _ in range(n_classes)]
    feat_rng = rng.split("features")
    rows, cols = [], []
    for node in range(n):
        pool = pools[labels[node]]
        n_own = own_lo + int(feat_rng.integers(0, own_hi - own_lo + 1))
        own = pool[feat_rng.choice_without_replacement(len(pool), n_own)]
        noise = feat_rng.choice_without_replacement(n_features, n_noise)
        words = np.unique(np.concatenate([own, noise]))
        rows.extend([node] * len(words))
        cols.extend(words.tolist())
    features = SparseMatrix.from_coo(n, n_features, rows, cols,
                                     np.ones(len(rows)))

    edge_rng = rng.split("edges")
    draw = edge_rng.random((n, n))
    same = labels[:, None] == labels[None, :]
    upper = np.triu(draw < np.where(same, p_within, p_across), k=1)
    u, v = np.nonzero(upper)
    edges = np.stack([u, v], axis=1)

    split_rng = rng.split("splits")
    order = split_rng.permutation(n)
    train = []
    for c in range(n_classes):
        members = order[labels[order] == c]
        train.extend(members[:labels_per_class].tolist())
    train = np.sort(np.asarray(train))
    rest = np.asarray([i for i in order if i not in set(train.tolist())])
    val = np.sort(rest[:120])
    test = np.sort(rest[120:420])
    return Graph(n, edges, features, labels, train, val, test, name="community")


def main():
    for name, graph in (("tiny", make_tiny()), ("blocks", make_blocks()),
                        ("community", make_community())):
        out = os.path.join(OUT_ROOT, name)
        store_dataset(graph, out)
        print(f"wrote {out}: {graph.num_nodes} nodes, {graph.num_edges} edges, "
              f"{graph.num_features} features, {graph.num_classes} classes")


if __name__ == "__main__":
    main()

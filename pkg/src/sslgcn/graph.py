"""Graph container and the symmetric renormalized adjacency.

A `Graph` is immutable after construction: node count, undirected edges
(stored once as u < v pairs), a sparse node-feature matrix, per-node
labels (-1 marks unlabeled), and the three evaluation splits.
"""

from __future__ import annotations

import numpy as np

from .errors import ResourceLimitError, UsageError
from .sparse import SparseMatrix
from .tensor import Tensor

DENSIFY_CAP = 4096


class Graph:
    __slots__ = ("num_nodes", "edges", "features", "labels", "train_nodes",
                 "val_nodes", "test_nodes", "name", "_edge_keys")

    def __init__(self, num_nodes, edges, features, labels,
                 train_nodes, val_nodes, test_nodes, name="", validate=True):
        self.num_nodes = int(num_nodes)
        self.edges = np.asarray(edges, dtype=np.int64).reshape(-1, 2)
        self.features = features
        self.labels = np.asarray(labels, dtype=np.int64)
        self.train_nodes = np.asarray(train_nodes, dtype=np.int64)
        self.val_nodes = np.asarray(val_nodes, dtype=np.int64)
        self.test_nodes = np.asarray(test_nodes, dtype=np.int64)
        self.name = name
        self._edge_keys = None
        if validate:
            self._validate()

    def _validate(self):
        n = self.num_nodes
        e = self.edges
        if len(e):
            if e.min() < 0 or e.max() >= n:
                raise UsageError("edge endpoint out of range")
            if (e[:, 0] >= e[:, 1]).any():
                raise UsageError("edges must be stored as u < v (no self-loops)")
            keys = e[:, 0] * n + e[:, 1]
            if len(np.unique(keys)) != len(keys):
                raise UsageError("duplicate edges")
        if not isinstance(self.features, SparseMatrix) or self.features.rows != n:
            raise UsageError("features must be a sparse matrix with one row per node")
        if self.labels.shape != (n,):
            raise UsageError(f"labels must have shape ({n},)")
        splits = [self.train_nodes, self.val_nodes, self.test_nodes]
        all_ids = np.concatenate(splits) if any(len(s) for s in splits) else np.empty(0, np.int64)
        if len(all_ids):
            if all_ids.min() < 0 or all_ids.max() >= n:
                raise UsageError("split node id out of range")
            if len(np.unique(all_ids)) != len(all_ids):
                raise UsageError("train/val/test splits must be disjoint")
            if (self.labels[all_ids] < 0).any():
                raise UsageError("every split node must have a label")

    @property
    def num_edges(self) -> int:
        return len(self.edges)

    @property
    def num_features(self) -> int:
        return self.features.cols

    @property
    def num_classes(self) -> int:
        labeled = self.labels[self.labels >= 0]
        return int(labeled.max()) + 1 if len(labeled) else 0

    def degrees(self) -> np.ndarray:
        d = np.zeros(self.num_nodes, dtype=np.int64)
        if len(self.edges):
            d += np.bincount(self.edges[:, 0], minlength=self.num_nodes)
            d += np.bincount(self.edges[:, 1], minlength=self.num_nodes)
        return d

    def edge_keys_sorted(self) -> np.ndarray:
        """Sorted u*N+v keys for both edge directions (binary-search
        membership tests)."""
        if self._edge_keys is None:
            n = self.num_nodes
            u, v = self.edges[:, 0], self.edges[:, 1]
            self._edge_keys = np.sort(np.concatenate([u * n + v, v * n + u]))
        return self._edge_keys

    def with_edges(self, edges) -> "Graph":
        """Same nodes/features/labels/splits, different edge set."""
        return Graph(self.num_nodes, edges, self.features, self.labels,
                     self.train_nodes, self.val_nodes, self.test_nodes,
                     name=self.name)


class NormalizedAdjacency:
    """The propagation matrix used by every GCN layer: with one self-loop
    added per node, each entry (i, j) is 1/sqrt(deg_i * deg_j) over the
    self-loop-augmented degrees. Exactly symmetric by construction."""

    __slots__ = ("matrix", "source_edge_count")

    def __init__(self, matrix: SparseMatrix, source_edge_count: int):
        self.matrix = matrix
        self.source_edge_count = source_edge_count


def normalize_adjacency(g: Graph) -> NormalizedAdjacency:
    n = g.num_nodes
    aug_deg = (g.degrees() + 1).astype(np.float64)
    diag_ids = np.arange(n, dtype=np.int64)
    u, v = g.edges[:, 0], g.edges[:, 1]
    off = 1.0 / np.sqrt(aug_deg[u] * aug_deg[v])
    rows = np.concatenate([u, v, diag_ids])
    cols = np.concatenate([v, u, diag_ids])
    vals = np.concatenate([off, off, 1.0 / aug_deg])
    m = SparseMatrix.from_coo(n, n, rows, cols, vals, symmetric=True)
    return NormalizedAdjacency(m, source_edge_count=g.num_edges)


def adjacency_dense(g: Graph, cap=DENSIFY_CAP, dtype=np.float64) -> Tensor:
    """Binary symmetric adjacency with zero diagonal, as a dense tensor."""
    if g.num_nodes > cap:
        raise ResourceLimitError(
            f"refusing to densify {g.num_nodes} nodes (cap {cap})"
        )
    a = np.zeros((g.num_nodes, g.num_nodes), dtype=dtype)
    if len(g.edges):
        u, v = g.edges[:, 0], g.edges[:, 1]
        a[u, v] = 1.0
        a[v, u] = 1.0
    return Tensor._wrap(a)


def dense_to_edges(a: np.ndarray) -> np.ndarray:
    """Inverse of adjacency_dense for valid binary symmetric matrices."""
    u, v = np.nonzero(np.triu(np.asarray(a), k=1))
    return np.stack([u, v], axis=1).astype(np.int64)


def degree_stats(g: Graph):
    """(min, max, mean) node degree; zeros for an edgeless graph."""
    if g.num_nodes == 0:
        return 0, 0, 0.0
    d = g.degrees()
    return int(d.min()), int(d.max()), float(d.mean())


def normalize_edge_list(edges) -> np.ndarray:
    """Canonicalize a raw edge list: order each pair u < v, drop
    self-loops, deduplicate (adjacency is binary). For loaders that
    accept arbitrary pair lists; `Graph` itself requires canonical
    input."""
    edges = np.asarray(edges, dtype=np.int64).reshape(-1, 2)
    if len(edges) == 0:
        return edges
    lo = edges.min(axis=1)
    hi = edges.max(axis=1)
    keep = lo != hi
    pairs = np.unique(np.stack([lo[keep], hi[keep]], axis=1), axis=0)
    return pairs

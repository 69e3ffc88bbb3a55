"""Load/store the plain-text dataset interchange format.

A dataset directory holds five files (UTF-8, LF endings):

  meta.json     {"name", "num_nodes", "num_features", "num_classes"}
  edges.tsv     one undirected edge per line: "u<TAB>v", 0 <= u < v < N
  features.tsv  one nonzero per line: "node<TAB>feature_index<TAB>value"
  labels.tsv    one labeled node per line: "node<TAB>class_id"
  splits.json   {"train": [...], "val": [...], "test": [...]}

Loading is order-insensitive: permuting lines within any file yields the
same Graph.
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass

import numpy as np

from .errors import DataFormatError, DatasetValidationError
from .graph import Graph
from .sparse import SparseMatrix

FILES = ("meta.json", "edges.tsv", "features.tsv", "labels.tsv", "splits.json")

# Published reference statistics for the three citation benchmarks
# (node/edge/feature/class counts and the standard semi-supervised split).
# Note: the reference table lists citeseer's feature count as 3327, equal
# to its node count; commonly distributed copies have 3703 features, so
# that comparison is reported as informational.
PUBLISHED_CITATION_STATS = {
    "citeseer": {"nodes": 3327, "edges": 4732, "features": 3327, "classes": 6,
                 "train": 120, "val": 500, "test": 1000},
    "cora": {"nodes": 2708, "edges": 5429, "features": 1433, "classes": 7,
             "train": 140, "val": 500, "test": 1000},
    "pubmed": {"nodes": 19717, "edges": 44338, "features": 500, "classes": 3,
               "train": 60, "val": 500, "test": 1000},
}

EDGE_COUNT_TOLERANCE = 0.03  # public copies differ slightly after dedup


@dataclass
class DatasetMeta:
    name: str
    num_nodes: int
    num_features: int
    num_classes: int
    split_sizes: tuple  # (train, val, test)


def _require(path):
    if not os.path.isfile(path):
        raise FileNotFoundError(f"missing dataset file: {path}")
    return path


def _parse_tsv(path, n_fields, caster, what):
    rows = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.rstrip("\n")
            if not line:
                continue
            parts = line.split("\t")
            if len(parts) != n_fields:
                raise DataFormatError(path, lineno,
                                      f"expected {n_fields} tab-separated fields for {what}")
            try:
                rows.append(caster(parts))
            except ValueError as exc:
                raise DataFormatError(path, lineno, f"bad {what}: {exc}") from None
    return rows


def read_meta(directory) -> dict:
    path = _require(os.path.join(directory, "meta.json"))
    with open(path, encoding="utf-8") as fh:
        meta = json.load(fh)
    for key in ("name", "num_nodes", "num_features", "num_classes"):
        if key not in meta:
            raise DatasetValidationError(f"meta.json missing key {key!r}")
    return meta


def load_dataset(directory) -> Graph:
    meta = read_meta(directory)
    n = int(meta["num_nodes"])
    num_features = int(meta["num_features"])
    num_classes = int(meta["num_classes"])
    if num_classes < 2:
        raise DatasetValidationError(f"num_classes must be >= 2, got {num_classes}")

    edge_path = _require(os.path.join(directory, "edges.tsv"))
    edges = _parse_tsv(edge_path, 2, lambda p: (int(p[0]), int(p[1])), "edge")
    edges = np.asarray(edges, dtype=np.int64).reshape(-1, 2)
    if len(edges):
        if edges.min() < 0 or edges.max() >= n:
            raise DatasetValidationError(
                f"edge endpoint out of range: expected ids < {n}, found max {edges.max()}")
        if (edges[:, 0] >= edges[:, 1]).any():
            raise DatasetValidationError("edges must satisfy u < v")
        keys = edges[:, 0] * n + edges[:, 1]
        if len(np.unique(keys)) != len(keys):
            raise DatasetValidationError("duplicate edge lines")
        edges = edges[np.argsort(keys)]

    feat_path = _require(os.path.join(directory, "features.tsv"))
    triplets = _parse_tsv(feat_path, 3,
                          lambda p: (int(p[0]), int(p[1]), float(p[2])), "feature entry")
    if triplets:
        fr = np.array([t[0] for t in triplets], dtype=np.int64)
        fc = np.array([t[1] for t in triplets], dtype=np.int64)
        fv = np.array([t[2] for t in triplets], dtype=np.float64)
        if fr.max() >= n:
            raise DatasetValidationError(
                f"feature node id out of range: expected < {n}, found {fr.max()}")
        if fc.max() >= num_features:
            raise DatasetValidationError(
                f"feature index out of range: expected < {num_features}, found {fc.max()}")
    else:
        fr = fc = np.empty(0, dtype=np.int64)
        fv = np.empty(0, dtype=np.float64)
    features = SparseMatrix.from_coo(n, num_features, fr, fc, fv)

    label_path = _require(os.path.join(directory, "labels.tsv"))
    label_rows = _parse_tsv(label_path, 2, lambda p: (int(p[0]), int(p[1])), "label")
    labels = np.full(n, -1, dtype=np.int64)
    for node, cls in label_rows:
        if node < 0 or node >= n:
            raise DatasetValidationError(f"label node id out of range: {node}")
        if cls < 0 or cls >= num_classes:
            raise DatasetValidationError(
                f"class id out of range: expected < {num_classes}, found {cls}")
        labels[node] = cls

    split_path = _require(os.path.join(directory, "splits.json"))
    with open(split_path, encoding="utf-8") as fh:
        splits = json.load(fh)
    for key in ("train", "val", "test"):
        if key not in splits:
            raise DatasetValidationError(f"splits.json missing key {key!r}")

    return Graph(
        n, edges, features, labels,
        np.asarray(splits["train"], dtype=np.int64),
        np.asarray(splits["val"], dtype=np.int64),
        np.asarray(splits["test"], dtype=np.int64),
        name=str(meta["name"]),
    )


def dataset_meta(g: Graph) -> DatasetMeta:
    return DatasetMeta(
        name=g.name,
        num_nodes=g.num_nodes,
        num_features=g.num_features,
        num_classes=g.num_classes,
        split_sizes=(len(g.train_nodes), len(g.val_nodes), len(g.test_nodes)),
    )


def store_dataset(g: Graph, directory, num_classes=None):
    """Write a Graph back out in the interchange format (sorted lines)."""
    os.makedirs(directory, exist_ok=True)
    meta = {
        "name": g.name or "unnamed",
        "num_nodes": g.num_nodes,
        "num_features": g.num_features,
        "num_classes": int(num_classes if num_classes is not None else g.num_classes),
    }
    with open(os.path.join(directory, "meta.json"), "w", encoding="utf-8") as fh:
        json.dump(meta, fh, indent=2, sort_keys=True)
        fh.write("\n")
    with open(os.path.join(directory, "edges.tsv"), "w", encoding="utf-8") as fh:
        for u, v in g.edges:
            fh.write(f"{u}\t{v}\n")
    with open(os.path.join(directory, "features.tsv"), "w", encoding="utf-8") as fh:
        rows = g.features.row_ids_expanded()
        for r, c, val in zip(rows, g.features.indices, g.features.values):
            fh.write(f"{r}\t{c}\t{float(val)!r}\n")
    with open(os.path.join(directory, "labels.tsv"), "w", encoding="utf-8") as fh:
        for node in range(g.num_nodes):
            if g.labels[node] >= 0:
                fh.write(f"{node}\t{g.labels[node]}\n")
    with open(os.path.join(directory, "splits.json"), "w", encoding="utf-8") as fh:
        json.dump({"train": g.train_nodes.tolist(),
                   "val": g.val_nodes.tolist(),
                   "test": g.test_nodes.tolist()}, fh, sort_keys=True)
        fh.write("\n")


@dataclass
class CheckEntry:
    field: str
    expected: object
    found: object
    status: str  # "match" | "mismatch" | "info"


@dataclass
class ValidationReport:
    dataset: str
    entries: list

    @property
    def ok(self) -> bool:
        return all(e.status != "mismatch" for e in self.entries)

    def render(self) -> str:
        lines = [f"dataset {self.dataset}:"]
        for e in self.entries:
            lines.append(f"  {e.field:<12} expected {e.expected!s:<8} "
                         f"found {e.found!s:<8} {e.status}")
        return "\n".join(lines)


def validate_against_reference(g: Graph, meta: DatasetMeta) -> ValidationReport:
    """Compare a loaded dataset against the published benchmark statistics.

    Edge counts are compared with a tolerance (public copies differ after
    deduplication); citeseer's feature count is informational only.
    """
    name = meta.name.lower()
    ref = PUBLISHED_CITATION_STATS.get(name)
    entries = []
    if ref is None:
        entries.append(CheckEntry("dataset", "known benchmark", name, "info"))
        return ValidationReport(name, entries)

    def check(field, expected, found, status=None):
        if status is None:
            status = "match" if expected == found else "mismatch"
        entries.append(CheckEntry(field, expected, found, status))

    check("nodes", ref["nodes"], g.num_nodes)
    rel = abs(g.num_edges - ref["edges"]) / ref["edges"]
    check("edges", ref["edges"], g.num_edges,
          "match" if rel <= EDGE_COUNT_TOLERANCE else "mismatch")
    feat_status = "match" if ref["features"] == g.num_features else (
        "info" if name == "citeseer" else "mismatch")
    check("features", ref["features"], g.num_features, feat_status)
    check("categories", ref["classes"], meta.num_classes)
    for field, size in zip(("train", "val", "test"), meta.split_sizes):
        check(f"{field} split", ref[field], size)
    return ValidationReport(name, entries)

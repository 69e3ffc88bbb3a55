"""Convert the legacy citation-network distribution to the interchange format.

The original distribution ships eight files per dataset,
``ind.<name>.{x,y,tx,ty,allx,ally,graph,test.index}``: pickled scipy
sparse feature blocks and one-hot label blocks for the labeled training
rows (x/y), the test rows (tx/ty) and the full training pool
(allx/ally), a neighbor-list dictionary (graph), and the shuffled test
node ids (test.index). This tool reassembles them into one coherent
node ordering and writes the plain-text directory consumed by the
training engine:

    meta.json  edges.tsv  features.tsv  labels.tsv  splits.json

Output is deterministic (sorted lines), so converting twice yields
byte-identical files.
"""

from __future__ import annotations

import argparse
import json
import os
import pickle
import sys

import numpy as np
import scipy.sparse as sp

RAW_PARTS = ("x", "y", "tx", "ty", "allx", "ally", "graph")

# published statistics for the three citation benchmarks; mismatches are
# reported as warnings, never coerced (the emitted meta carries actual counts)
EXPECTED_STATS = {
    "citeseer": {"nodes": 3327, "edges": 4732, "classes": 6},
    "cora": {"nodes": 2708, "edges": 5429, "classes": 7},
    "pubmed": {"nodes": 19717, "edges": 44338, "classes": 3},
}

VAL_SIZE = 500  # standard semi-supervised protocol


class ConversionError(ValueError):
    pass


def _load_pickled(path):
    # the distribution was pickled under python 2; latin1 keeps byte strings
    with open(path, "rb") as fh:
        return pickle.load(fh, encoding="latin1")


def read_bundle(name, in_dir):
    """Load the eight distribution files for one dataset."""
    bundle = {}
    for part in RAW_PARTS:
        path = os.path.join(in_dir, f"ind.{name}.{part}")
        if not os.path.isfile(path):
            raise ConversionError(f"missing distribution file: {path}")
        bundle[part] = _load_pickled(path)
    index_path = os.path.join(in_dir, f"ind.{name}.test.index")
    if not os.path.isfile(index_path):
        raise ConversionError(f"missing distribution file: {index_path}")
    with open(index_path) as fh:
        try:
            bundle["test.index"] = [int(line) for line in fh.read().split()]
        except ValueError as exc:
            raise ConversionError(f"unparsable test index: {exc}") from None
    return bundle


def assemble(bundle):
    """Reorder the raw blocks into one node space.

    Returns (features csr, labels one-hot, train/val/test index arrays).
    Isolated test ids absent from tx/ty (the known citeseer quirk) are
    zero-padded: they end up unlabeled and outside every split.
    """
    x, y = bundle["x"], bundle["y"]
    tx, ty = bundle["tx"], bundle["ty"]
    allx, ally = bundle["allx"], bundle["ally"]
    test_idx = np.asarray(bundle["test.index"], dtype=np.int64)
    if len(test_idx) == 0:
        raise ConversionError("empty test index")
    test_sorted = np.sort(test_idx)
    if len(np.unique(test_sorted)) != len(test_sorted):
        raise ConversionError("duplicate ids in test index")
    if test_sorted.min() < allx.shape[0]:
        raise ConversionError(
            f"test id {test_sorted.min()} overlaps the training pool "
            f"(pool rows: {allx.shape[0]})")

    full = np.arange(test_sorted.min(), test_sorted.max() + 1)
    if len(full) != len(test_sorted):
        # pad missing test rows with zero features / zero labels
        tx_ext = sp.lil_matrix((len(full), x.shape[1]), dtype=np.float64)
        tx_ext[test_sorted - full.min(), :] = tx
        tx = tx_ext.tocsr()
        ty_ext = np.zeros((len(full), y.shape[1]))
        ty_ext[test_sorted - full.min(), :] = ty
        ty = ty_ext

    num_nodes = allx.shape[0] + tx.shape[0]
    if test_sorted.min() != allx.shape[0] or test_sorted.max() != num_nodes - 1:
        raise ConversionError(
            f"test block [{test_sorted.min()}, {test_sorted.max()}] does not "
            f"abut the training pool of {allx.shape[0]} rows")

    features = sp.vstack((allx, tx)).tolil()
    features[test_idx, :] = features[test_sorted, :]
    features = features.tocsr()
    labels = np.vstack((ally, ty))
    labels[test_idx, :] = labels[test_sorted, :]

    n_train = y.shape[0]
    train = np.arange(n_train, dtype=np.int64)
    val_end = min(n_train + VAL_SIZE, allx.shape[0])
    val = np.arange(n_train, val_end, dtype=np.int64)
    return features, labels, train, val, test_sorted


def undirected_edges(graph_dict, num_nodes):
    """Collapse the neighbor-list dict to unique u < v pairs; self-loops
    are dropped."""
    pairs = set()
    for node, neighbors in graph_dict.items():
        node = int(node)
        if node < 0 or node >= num_nodes:
            raise ConversionError(f"graph node id out of range: {node}")
        for nb in neighbors:
            nb = int(nb)
            if nb < 0 or nb >= num_nodes:
                raise ConversionError(f"graph neighbor id out of range: {nb}")
            if nb == node:
                continue
            pairs.add((node, nb) if node < nb else (nb, node))
    return sorted(pairs)


def convert(name, in_dir, out_dir, log=print):
    """Read one raw bundle and emit the interchange directory."""
    bundle = read_bundle(name, in_dir)
    features, labels, train, val, test = assemble(bundle)
    num_nodes = features.shape[0]
    if labels.shape[0] != num_nodes:
        raise ConversionError(
            f"feature/label row mismatch: {num_nodes} vs {labels.shape[0]}")
    edges = undirected_edges(bundle["graph"], num_nodes)

    expected = EXPECTED_STATS.get(name)
    num_classes = labels.shape[1]
    if expected:
        for field, actual in (("nodes", num_nodes), ("edges", len(edges)),
                              ("classes", num_classes)):
            if expected[field] != actual:
                log(f"warning: {name} {field} = {actual}, "
                    f"reference table says {expected[field]} (kept actual)")

    os.makedirs(out_dir, exist_ok=True)
    meta = {"name": name, "num_nodes": int(num_nodes),
            "num_features": int(features.shape[1]),
            "num_classes": int(num_classes)}
    with open(os.path.join(out_dir, "meta.json"), "w", encoding="utf-8") as fh:
        json.dump(meta, fh, indent=2, sort_keys=True)
        fh.write("\n")

    with open(os.path.join(out_dir, "edges.tsv"), "w", encoding="utf-8", newline="\n") as fh:
        for u, v in edges:
            fh.write(f"{u}\t{v}\n")

    coo = features.tocoo()
    order = np.lexsort((coo.col, coo.row))
    with open(os.path.join(out_dir, "features.tsv"), "w", encoding="utf-8", newline="\n") as fh:
        for k in order:
            value = float(coo.data[k])
            if value != 0.0:  # padding rows stay structurally empty
                fh.write(f"{coo.row[k]}\t{coo.col[k]}\t{value!r}\n")

    label_ids = labels.argmax(axis=1)
    labeled = labels.sum(axis=1) > 0  # zero-padded rows have no label
    with open(os.path.join(out_dir, "labels.tsv"), "w", encoding="utf-8", newline="\n") as fh:
        for node in range(num_nodes):
            if labeled[node]:
                fh.write(f"{node}\t{int(label_ids[node])}\n")

    with open(os.path.join(out_dir, "splits.json"), "w", encoding="utf-8") as fh:
        json.dump({"train": train.tolist(), "val": val.tolist(),
                   "test": test.tolist()}, fh, sort_keys=True)
        fh.write("\n")
    log(f"converted {name}: {num_nodes} nodes, {len(edges)} edges, "
        f"{features.shape[1]} features, {num_classes} classes, "
        f"splits {len(train)}/{len(val)}/{len(test)}")
    return meta


def verify(out_dir, log=print):
    """Re-read an emitted directory and check internal consistency.

    Returns a dict of counts and a list of problems (empty when clean).
    """
    problems = []

    def check(cond, message):
        if not cond:
            problems.append(message)

    meta_path = os.path.join(out_dir, "meta.json")
    check(os.path.isfile(meta_path), "meta.json missing")
    if problems:
        return {}, problems
    with open(meta_path, encoding="utf-8") as fh:
        meta = json.load(fh)
    n = int(meta["num_nodes"])
    f = int(meta["num_features"])
    c = int(meta["num_classes"])

    edges = set()
    with open(os.path.join(out_dir, "edges.tsv"), encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            parts = line.rstrip("\n").split("\t")
            ok = len(parts) == 2
            u = v = None
            if ok:
                try:
                    u, v = int(parts[0]), int(parts[1])
                except ValueError:
                    ok = False
            check(ok, f"edges.tsv:{lineno}: malformed line")
            if not ok:
                continue
            check(0 <= u < v < n, f"edges.tsv:{lineno}: bad pair ({u}, {v})")
            check((u, v) not in edges, f"edges.tsv:{lineno}: duplicate edge")
            edges.add((u, v))

    n_feature_entries = 0
    with open(os.path.join(out_dir, "features.tsv"), encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            parts = line.rstrip("\n").split("\t")
            ok = len(parts) == 3
            if ok:
                try:
                    node, col, value = int(parts[0]), int(parts[1]), float(parts[2])
                except ValueError:
                    ok = False
            check(ok, f"features.tsv:{lineno}: malformed line")
            if not ok:
                continue
            check(0 <= node < n and 0 <= col < f and value != 0.0,
                  f"features.tsv:{lineno}: bad entry")
            n_feature_entries += 1

    labeled = {}
    with open(os.path.join(out_dir, "labels.tsv"), encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            parts = line.rstrip("\n").split("\t")
            ok = len(parts) == 2
            if ok:
                try:
                    node, cls = int(parts[0]), int(parts[1])
                except ValueError:
                    ok = False
            check(ok, f"labels.tsv:{lineno}: malformed line")
            if not ok:
                continue
            check(0 <= node < n and 0 <= cls < c, f"labels.tsv:{lineno}: bad entry")
            check(node not in labeled, f"labels.tsv:{lineno}: duplicate node")
            labeled[node] = cls

    with open(os.path.join(out_dir, "splits.json"), encoding="utf-8") as fh:
        splits = json.load(fh)
    ids = []
    for key in ("train", "val", "test"):
        check(key in splits, f"splits.json missing {key}")
        ids.extend(splits.get(key, []))
    check(all(0 <= i < n for i in ids), "split id out of range")
    check(len(set(ids)) == len(ids), "splits overlap")
    check(all(i in labeled for i in ids), "split node without label")

    counts = {
        "nodes": n,
        "edges": len(edges),
        "features": f,
        "feature_entries": n_feature_entries,
        "classes": c,
        "labeled": len(labeled),
        "train": len(splits.get("train", [])),
        "val": len(splits.get("val", [])),
        "test": len(splits.get("test", [])),
    }
    log(f"verify {out_dir}:")
    for key, value in counts.items():
        log(f"  {key:<16} {value}")
    if problems:
        for p in problems:
            log(f"  PROBLEM: {p}")
    else:
        log("  all checks pass")
    return counts, problems


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="planetoid-convert",
        description="Convert a legacy citation-dataset bundle "
                    "(ind.<name>.*) to the plain-text interchange format.")
    parser.add_argument("name", nargs="?",
                        help="dataset name, e.g. cora / citeseer / pubmed")
    parser.add_argument("in_dir", nargs="?", help="directory with the raw files")
    parser.add_argument("out_dir", nargs="?", help="interchange directory to write")
    parser.add_argument("--verify-only", metavar="DIR",
                        help="only re-check an already converted directory")
    args = parser.parse_args(argv)
    try:
        if args.verify_only:
            _, problems = verify(args.verify_only)
            return 1 if problems else 0
        if not (args.name and args.in_dir and args.out_dir):
            parser.print_usage(sys.stderr)
            print("error: name, in_dir and out_dir are required", file=sys.stderr)
            return 2
        convert(args.name, args.in_dir, args.out_dir)
        _, problems = verify(args.out_dir)
        return 1 if problems else 0
    except ConversionError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())

"""Converter release criterion, runnable only when the original Cora
distribution files are present (ind.cora.* under converter/raw/ or
$PLANETOID_RAW)."""

import os

import pytest

from planetoid_converter.convert import convert, verify

HERE = os.path.dirname(os.path.abspath(__file__))


def raw_dir():
    candidates = [os.environ.get("PLANETOID_RAW"),
                  os.path.join(HERE, "..", "raw")]
    for cand in candidates:
        if cand and os.path.isfile(os.path.join(cand, "ind.cora.x")):
            return cand
    pytest.skip("original cora distribution files not present "
                "(place ind.cora.* under converter/raw/ or set $PLANETOID_RAW)")


class TestCoraConversion:
    def test_counts_round_trip_and_determinism(self, tmp_path):
        raw = raw_dir()
        out_a = tmp_path / "a"
        out_b = tmp_path / "b"
        meta = convert("cora", raw, out_a, log=lambda *a: None)
        convert("cora", raw, out_b, log=lambda *a: None)

        assert meta["num_nodes"] == 2708
        assert meta["num_classes"] == 7
        assert meta["num_features"] == 1433
        counts, problems = verify(out_a, log=lambda *a: None)
        assert problems == []
        assert (counts["train"], counts["val"], counts["test"]) == (140, 500, 1000)

        for name in ("meta.json", "edges.tsv", "features.tsv", "labels.tsv",
                     "splits.json"):
            assert (out_a / name).read_bytes() == (out_b / name).read_bytes()

        sslgcn = pytest.importorskip("sslgcn")
        g = sslgcn.load_dataset(out_a)
        assert g.num_nodes == 2708
        assert g.num_classes == 7
        assert g.num_features == 1433
        assert (len(g.train_nodes), len(g.val_nodes), len(g.test_nodes)) == \
            (140, 500, 1000)

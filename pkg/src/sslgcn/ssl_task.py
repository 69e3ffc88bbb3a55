"""Self-supervised pretext task: input corruption and link reconstruction.

Two corruption strategies produce the pretraining input:

  * remove-links ("rrl"): delete a fraction of the undirected edges,
  * cover-features ("rcf"): zero a fraction of each node's nonzero
    feature entries.

Either way the model is trained to reconstruct the *uncorrupted*
adjacency from node embeddings, scoring every pair through the
parameter-free decoder sigmoid(H Hᵀ). Because real graphs are sparse,
positive (link) terms in the reconstruction cross-entropy are scaled by
the non-link/link ratio W.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from .errors import ConfigError, DegenerateInputError, ShapeError
from .graph import DENSIFY_CAP, Graph, NormalizedAdjacency, adjacency_dense, normalize_adjacency
from .rng import Rng
from .sparse import SparseMatrix
from .tensor import Tensor, _sigmoid_array


class Strategy(str, Enum):
    REMOVE_LINKS = "rrl"
    COVER_FEATURES = "rcf"
    BOTH = "both"

    @property
    def removes_links(self) -> bool:
        return self in (Strategy.REMOVE_LINKS, Strategy.BOTH)

    @property
    def covers_features(self) -> bool:
        return self in (Strategy.COVER_FEATURES, Strategy.BOTH)


@dataclass
class SslConfig:
    strategy: Strategy = Strategy.BOTH
    removal_fraction: float = 0.0  # share of undirected edges to delete
    cover_fraction: float = 0.0    # share of each node's nonzero features to zero
    seed: int = 0
    # the covered share can alternatively be taken over *all* feature slots
    # (covering a structural zero is then a no-op)
    cover_all_entries: bool = False

    def __post_init__(self):
        self.strategy = Strategy(self.strategy)
        if not 0.0 <= self.removal_fraction <= 1.0:
            raise ConfigError(f"removal_fraction out of [0,1]: {self.removal_fraction}")
        if not 0.0 <= self.cover_fraction <= 1.0:
            raise ConfigError(f"cover_fraction out of [0,1]: {self.cover_fraction}")


@dataclass
class SslInput:
    """Corrupted inputs plus the uncorrupted reconstruction target."""

    corrupted_adjacency: NormalizedAdjacency
    corrupted_features: SparseMatrix
    target_dense: Tensor | None  # None above the densify cap (sampled loss)
    positive_weight: float
    graph: Graph  # uncorrupted source graph
    kept_edges: np.ndarray = field(repr=False, default=None)


def rrl_mask(g: Graph, removal_fraction, rng: Rng) -> np.ndarray:
    """Edges kept after removing round(p * |E|) undirected edges,
    uniformly without replacement. Both directions go together since
    edges are stored once."""
    if not 0.0 <= removal_fraction <= 1.0:
        raise ConfigError(f"removal fraction out of [0,1]: {removal_fraction}")
    n_edges = g.num_edges
    n_remove = round(removal_fraction * n_edges)
    if n_remove == 0:
        return g.edges
    removed = rng.choice_without_replacement(n_edges, n_remove)
    keep = np.ones(n_edges, dtype=bool)
    keep[removed] = False
    return g.edges[keep]


def rcf_mask(g: Graph, cover_fraction, rng: Rng, cover_all_entries=False) -> SparseMatrix:
    """Features with round(p * nnz_row) nonzeros zeroed per node.

    With cover_all_entries=True the draw is round(p * F) slots out of all
    F per node; covering a slot that is already zero is a no-op.
    """
    if not 0.0 <= cover_fraction <= 1.0:
        raise ConfigError(f"cover fraction out of [0,1]: {cover_fraction}")
    feats = g.features
    if cover_fraction == 0.0 or feats.nnz == 0:
        return feats
    keep = np.ones(feats.nnz, dtype=bool)
    for node in range(feats.rows):
        lo, hi = feats.indptr[node], feats.indptr[node + 1]
        nnz_row = int(hi - lo)
        if nnz_row == 0:
            continue
        if cover_all_entries:
            n_slots = round(cover_fraction * feats.cols)
            slots = rng.choice_without_replacement(feats.cols, n_slots)
            covered = np.isin(feats.indices[lo:hi], slots)
            keep[lo:hi] = ~covered
        else:
            n_cover = round(cover_fraction * nnz_row)
            if n_cover == 0:
                continue
            covered = rng.choice_without_replacement(nnz_row, n_cover)
            keep[lo + covered] = False
    return feats.scaled_values(keep, 1.0)


def positive_weight(g: Graph) -> float:
    """Non-link to link ratio of the binary adjacency: (N^2 - nnz) / nnz
    with nnz = 2|E| (both directions, zero diagonal)."""
    nnz = 2 * g.num_edges
    if nnz == 0:
        raise DegenerateInputError("positive_weight needs at least one edge")
    n_sq = g.num_nodes * g.num_nodes
    return (n_sq - nnz) / nnz


def link_decoder_logits(h: Tensor, tape) -> Tensor:
    """Pairwise scores H Hᵀ for every node pair (sigmoid is folded into
    the loss for stability). Symmetric by construction."""
    hd = h.data
    out = Tensor._wrap(hd @ hd.T)
    if tape is not None:
        tape.record((h,), out, lambda g: (g @ hd + g.T @ hd,))
    return out


def weighted_link_loss(logits: Tensor, target: Tensor, pos_weight, tape) -> Tensor:
    """Mean weighted binary cross-entropy over all N^2 adjacency entries,
    computed from logits in saturation-proof form; link terms scaled by
    `pos_weight`."""
    if logits.shape != target.shape:
        raise ShapeError(f"loss shapes differ: {logits.shape} vs {target.shape}")
    w = float(pos_weight)
    if w <= 0:
        raise ConfigError(f"positive weight must be > 0, got {w}")
    x = logits.data
    t = target.data.astype(x.dtype, copy=False)
    # stable -log sigmoid(x) = max(-x, 0) + log1p(exp(-|x|)); the
    # negative-class term is softplus(x) = softplus(-x) + x, so per entry:
    #   w*t*softplus(-x) + (1-t)*(softplus(-x) + x)
    #     = (1 + (w-1)*t) * softplus(-x) + (1-t)*x
    # (in-place passes: this runs once per epoch over all N^2 entries)
    softplus_neg = np.abs(x)
    np.negative(softplus_neg, out=softplus_neg)
    np.exp(softplus_neg, out=softplus_neg)
    np.log1p(softplus_neg, out=softplus_neg)
    softplus_neg += np.maximum(-x, 0)
    pos_scale = 1.0 + (w - 1.0) * t
    per_entry = pos_scale * softplus_neg
    per_entry += (1.0 - t) * x
    n_entries = per_entry.size
    value = per_entry.sum(dtype=np.float64) / n_entries
    out = Tensor._wrap(np.asarray(value, dtype=x.dtype).reshape(1, 1))
    if tape is not None:

        def grad(g):
            # d/dx = sigmoid(x) * (1 + (w-1)t) - w*t, with
            # sigmoid(x) = exp(-softplus(-x)) reusing the forward buffer
            coeff = np.exp(-softplus_neg)
            coeff *= pos_scale
            coeff -= w * t
            coeff *= g[0, 0] / n_entries
            return (coeff,)

        tape.record((logits,), out, grad)
    return out


def _pair_logits(hd, heads, tails):
    return np.einsum("ij,ij->i", hd[heads], hd[tails])


def sampled_link_loss(h: Tensor, g: Graph, neg_per_pos, rng: Rng, tape,
                      pos_weight=None) -> Tensor:
    """Memory-bounded estimate of `weighted_link_loss` over the full
    adjacency: all link pairs are scored, plus `neg_per_pos` uniformly
    sampled non-link pairs per link, reweighted so the expectation equals
    the full N^2 mean."""
    if neg_per_pos < 1:
        raise ConfigError(f"neg_per_pos must be >= 1, got {neg_per_pos}")
    w = float(pos_weight) if pos_weight is not None else positive_weight(g)
    n = g.num_nodes
    hd = h.data
    u, v = g.edges[:, 0], g.edges[:, 1]
    pos_heads = np.concatenate([u, v])
    pos_tails = np.concatenate([v, u])
    n_pos = len(pos_heads)

    # uniform non-link ordered pairs (diagonal included: it is a non-link)
    n_neg = neg_per_pos * n_pos
    edge_keys = g.edge_keys_sorted()
    neg_heads = np.empty(n_neg, dtype=np.int64)
    neg_tails = np.empty(n_neg, dtype=np.int64)
    got = 0
    while got < n_neg:
        want = n_neg - got
        cand = rng.integers(0, n, size=2 * (want + 8)).reshape(-1, 2)
        keys = cand[:, 0] * n + cand[:, 1]
        pos = np.searchsorted(edge_keys, keys)
        is_link = (pos < len(edge_keys)) & (edge_keys[np.minimum(pos, len(edge_keys) - 1)] == keys)
        cand = cand[~is_link][:want]
        neg_heads[got:got + len(cand)] = cand[:, 0]
        neg_tails[got:got + len(cand)] = cand[:, 1]
        got += len(cand)

    x_pos = _pair_logits(hd, pos_heads, pos_tails)
    x_neg = _pair_logits(hd, neg_heads, neg_tails)
    losses_pos = np.maximum(-x_pos, 0) + np.log1p(np.exp(-np.abs(x_pos)))
    losses_neg = np.maximum(x_neg, 0) + np.log1p(np.exp(-np.abs(x_neg)))
    n_sq = n * n
    n_nonlinks = n_sq - n_pos
    value = (w * losses_pos.sum(dtype=np.float64)
             + n_nonlinks * losses_neg.mean(dtype=np.float64)) / n_sq
    out = Tensor._wrap(np.asarray(value, dtype=hd.dtype).reshape(1, 1))
    if tape is not None:
        s_pos = _sigmoid_array(x_pos)
        s_neg = _sigmoid_array(x_neg)

        def grad(gout):
            g0 = gout[0, 0] / n_sq
            coeff_pos = (w * (s_pos - 1.0) * g0).astype(hd.dtype)
            coeff_neg = (s_neg * (n_nonlinks / n_neg) * g0).astype(hd.dtype)
            dh = np.zeros_like(hd)
            np.add.at(dh, pos_heads, coeff_pos[:, None] * hd[pos_tails])
            np.add.at(dh, pos_tails, coeff_pos[:, None] * hd[pos_heads])
            np.add.at(dh, neg_heads, coeff_neg[:, None] * hd[neg_tails])
            np.add.at(dh, neg_tails, coeff_neg[:, None] * hd[neg_heads])
            return (dh,)

        tape.record((h,), out, grad)
    return out


def build_ssl_input(g: Graph, cfg: SslConfig, rng: Rng | None = None,
                    densify_cap=DENSIFY_CAP) -> SslInput:
    """Apply the configured corruption once and package the pretext
    inputs. The reconstruction target is always the uncorrupted
    adjacency; the positive weight is computed from the uncorrupted
    graph. An explicit `rng` overrides the config seed (the training
    pipeline derives it from the run seed)."""
    if rng is None:
        rng = Rng(cfg.seed)
    kept = g.edges
    if cfg.strategy.removes_links:
        kept = rrl_mask(g, cfg.removal_fraction, rng.split("remove-links"))
    feats = g.features
    if cfg.strategy.covers_features:
        feats = rcf_mask(g, cfg.cover_fraction, rng.split("cover-features"),
                         cover_all_entries=cfg.cover_all_entries)
    corrupted = g.with_edges(kept)
    target = adjacency_dense(g, cap=densify_cap) if g.num_nodes <= densify_cap else None
    return SslInput(
        corrupted_adjacency=normalize_adjacency(corrupted),
        corrupted_features=feats,
        target_dense=target,
        positive_weight=positive_weight(g),
        graph=g,
        kept_edges=kept,
    )

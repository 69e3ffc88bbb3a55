"""Two-layer GCN classifier, the shared pretraining encoder, and weight
transfer between the two.

The encoder is the first graph-convolution layer (features -> hidden,
ReLU, dropout on input and output). The classifier stacks a second
graph convolution (hidden -> classes) with a row softmax. Pretraining
optimizes the encoder against the link-reconstruction objective;
`transfer_weights` then copies the shared `theta1` into a fresh
classifier whose task head stays randomly initialized.
"""

from __future__ import annotations

import base64
import json
import os
from dataclasses import dataclass, field

import numpy as np

from .errors import ShapeError, TransferError, UsageError
from .sparse import SparseMatrix, dropout_sparse, spmm
from .tensor import (Parameter, Tensor, add, add_row, dropout, matmul, relu,
                     scale, softmax_rows, square, sum_all)

HIDDEN_UNITS = 32
PROB_FLOOR = 1e-12  # clamp for log terms under float32 saturation


def glorot_init(shape, rng, dtype=np.float32) -> Tensor:
    """Uniform in +/- sqrt(6 / (fan_in + fan_out))."""
    fan_in, fan_out = shape
    limit = np.sqrt(6.0 / (fan_in + fan_out))
    return Tensor(rng.uniform(-limit, limit, size=shape), dtype=dtype)


class GcnEncoder:
    """First GCN layer: relu(A_norm @ (dropout(X) @ theta1))."""

    def __init__(self, num_features, hidden=HIDDEN_UNITS, input_dropout=0.5,
                 hidden_dropout=0.5, rng=None, dtype=np.float32, bias=False):
        self.hidden = int(hidden)
        self.input_dropout = float(input_dropout)
        self.hidden_dropout = float(hidden_dropout)
        self.theta1 = Parameter(glorot_init((num_features, self.hidden), rng, dtype).data,
                                name="theta1")
        self.bias1 = Parameter(np.zeros((1, self.hidden), dtype=dtype), name="bias1") \
            if bias else None

    def parameters(self):
        return [self.theta1] + ([self.bias1] if self.bias1 is not None else [])


class GcnClassifier:
    """Encoder plus a task head: softmax(A_norm @ (H @ theta2))."""

    def __init__(self, num_features, num_classes, hidden=HIDDEN_UNITS,
                 input_dropout=0.5, hidden_dropout=0.5, rng=None,
                 dtype=np.float32, bias=False):
        self.encoder = GcnEncoder(num_features, hidden, input_dropout,
                                  hidden_dropout, rng=rng.split("layer1"),
                                  dtype=dtype, bias=bias)
        self.num_classes = int(num_classes)
        self.theta2 = Parameter(glorot_init((self.encoder.hidden, num_classes),
                                            rng.split("layer2"), dtype).data,
                                name="theta2")
        self.bias2 = Parameter(np.zeros((1, num_classes), dtype=dtype), name="bias2") \
            if bias else None

    def parameters(self):
        return self.encoder.parameters() + [self.theta2] + \
            ([self.bias2] if self.bias2 is not None else [])


def _input_times_weight(x, theta, rate, rng, training, tape):
    if isinstance(x, SparseMatrix):
        dropped = dropout_sparse(x, rate, rng, training)
        return spmm(dropped, theta, tape)
    dropped = dropout(x, rate, rng, training, tape)
    return matmul(dropped, theta, tape)


def encoder_forward(enc: GcnEncoder, x, adj, rng, training, tape) -> Tensor:
    """Hidden representation (N x hidden). `x` may be a SparseMatrix or a
    dense Tensor; `adj` is a NormalizedAdjacency. Dropout is applied to
    the input and to the output when training."""
    if adj.matrix.cols != x.rows:
        raise ShapeError(f"encoder: adjacency {adj.matrix.shape} does not match "
                         f"features ({x.rows} rows)")
    xw = _input_times_weight(x, enc.theta1, enc.input_dropout, rng, training, tape)
    pre = spmm(adj.matrix, xw, tape)
    if enc.bias1 is not None:
        pre = add_row(pre, enc.bias1, tape)
    h = relu(pre, tape)
    return dropout(h, enc.hidden_dropout, rng, training, tape)


def classify_forward(model: GcnClassifier, x, adj, rng, training, tape) -> Tensor:
    """Class probabilities (N x C, rows sum to 1)."""
    h = encoder_forward(model.encoder, x, adj, rng, training, tape)
    hw = matmul(h, model.theta2, tape)
    pre = spmm(adj.matrix, hw, tape)
    if model.bias2 is not None:
        pre = add_row(pre, model.bias2, tape)
    return softmax_rows(pre, tape)


def masked_cross_entropy(z: Tensor, labels, mask_nodes, tape) -> Tensor:
    """Mean over `mask_nodes` of -log z[node, label], clamped at
    PROB_FLOOR so the value is finite even when float32 saturates."""
    labels = np.asarray(labels, dtype=np.int64)
    mask_nodes = np.asarray(mask_nodes, dtype=np.int64)
    if len(mask_nodes) == 0:
        raise UsageError("masked_cross_entropy: empty node mask")
    mask_labels = labels[mask_nodes]
    if (mask_labels < 0).any():
        bad = mask_nodes[mask_labels < 0][0]
        raise UsageError(f"masked_cross_entropy: node {bad} has no label")
    picked = z.data[mask_nodes, mask_labels]
    clamped = np.maximum(picked, PROB_FLOOR)
    n = len(mask_nodes)
    value = -np.log(clamped).sum(dtype=np.float64) / n
    out = Tensor._wrap(np.asarray(value, dtype=z.data.dtype).reshape(1, 1))
    if tape is not None:

        def grad(g):
            dz = np.zeros_like(z.data)
            live = picked > PROB_FLOOR  # below the floor the clamp kills the slope
            np.subtract.at(dz, (mask_nodes[live], mask_labels[live]),
                           (g[0, 0] / n) / clamped[live])
            return (dz,)

        tape.record((z,), out, grad)
    return out


def l2_penalty(params, weight, tape) -> Tensor:
    """weight * sum of squares over `params` (composed from primitive ops
    so the gradient comes off the tape like everything else)."""
    total = None
    for p in params:
        s = sum_all(square(p, tape), tape)
        total = s if total is None else add(total, s, tape)
    if total is None:
        raise UsageError("l2_penalty: no parameters given")
    return scale(total, weight, tape)


# ---------------------------------------------------------------------------
# weight snapshots


SNAPSHOT_VERSION = 1


@dataclass
class WeightSnapshot:
    """Named tensors plus provenance, serializable to a self-describing
    JSON container (shapes, dtypes, base64 little-endian payloads)."""

    tensors: dict
    provenance: str  # "pretrained" | "random"
    seed: int
    format_version: int = SNAPSHOT_VERSION

    def to_json(self) -> str:
        body = {
            "format_version": self.format_version,
            "provenance": self.provenance,
            "seed": self.seed,
            "tensors": {
                name: {
                    "shape": list(arr.shape),
                    "dtype": arr.dtype.name,
                    "data": base64.b64encode(
                        np.ascontiguousarray(arr, dtype=arr.dtype)
                        .astype(arr.dtype.newbyteorder("<"))
                        .tobytes()
                    ).decode("ascii"),
                }
                for name, arr in sorted(self.tensors.items())
            },
        }
        return json.dumps(body, sort_keys=True, separators=(",", ":"))

    def save(self, path):
        tmp = f"{path}.tmp"
        with open(tmp, "w", encoding="utf-8") as fh:
            fh.write(self.to_json())
            fh.write("\n")
        os.replace(tmp, path)

    @classmethod
    def from_json(cls, text) -> "WeightSnapshot":
        body = json.loads(text)
        if body.get("format_version") != SNAPSHOT_VERSION:
            raise UsageError(f"unsupported snapshot version: {body.get('format_version')}")
        tensors = {}
        for name, entry in body["tensors"].items():
            dt = np.dtype(entry["dtype"]).newbyteorder("<")
            arr = np.frombuffer(base64.b64decode(entry["data"]), dtype=dt)
            tensors[name] = arr.astype(np.dtype(entry["dtype"])).reshape(entry["shape"])
        return cls(tensors=tensors, provenance=body["provenance"], seed=body["seed"])

    @classmethod
    def load(cls, path) -> "WeightSnapshot":
        with open(path, encoding="utf-8") as fh:
            return cls.from_json(fh.read())


def random_snapshot(seed) -> WeightSnapshot:
    """Empty snapshot: transferring it leaves the model at its own seeded
    initialization, which is exactly the no-pretraining baseline."""
    return WeightSnapshot(tensors={}, provenance="random", seed=int(seed))


@dataclass
class TransferReport:
    transferred: list = field(default_factory=list)
    skipped: list = field(default_factory=list)


def transfer_weights(snapshot: WeightSnapshot, model: GcnClassifier) -> TransferReport:
    """Copy snapshot tensors onto same-named model parameters.

    All shape/dtype checks run before any copy, so a failed transfer
    leaves the model unmodified. Parameters without a snapshot entry and
    snapshot entries without a matching parameter are reported as
    skipped."""
    params = {p.name: p for p in model.parameters()}
    staged = []
    report = TransferReport()
    for name, p in sorted(params.items()):
        src = snapshot.tensors.get(name)
        if src is None:
            report.skipped.append(f"{name} (not in snapshot)")
            continue
        if tuple(src.shape) != p.shape:
            raise TransferError(
                f"parameter {name!r}: snapshot shape {tuple(src.shape)} "
                f"does not match model shape {p.shape}")
        if src.dtype != p.data.dtype:
            raise TransferError(
                f"parameter {name!r}: snapshot dtype {src.dtype} "
                f"does not match model dtype {p.data.dtype}")
        staged.append((p, src))
        report.transferred.append(name)
    for name in sorted(snapshot.tensors):
        if name not in params:
            report.skipped.append(f"{name} (no matching parameter)")
    for p, src in staged:
        p.data[...] = src
    return report

"""Dense 2-D tensors, the gradient tape, and the differentiable op set.

The engine is deliberately small: every tensor is a 2-D row-major numpy
array, and the op set is exactly what the models and losses need
(matmul, sparse matmul, elementwise, reductions, activations, dropout,
and the fused losses that live next to their models). Ops run in the
dtype of their inputs, so the same code paths execute in float32 for
training and float64 for verification.

Gradients: each op appends a record to a `Tape`; `backward` replays the
tape in reverse and accumulates d(loss)/d(param) into `Parameter.grad`.
Calling `backward` twice without `zero_grad` accumulates additively.
"""

from __future__ import annotations

import itertools

import numpy as np

from .errors import ConfigError, ShapeError, UsageError

_next_id = itertools.count()

_FLOAT_DTYPES = (np.float32, np.float64)


def _as_matrix(data, dtype):
    arr = np.asarray(data, dtype=dtype)
    if arr.ndim == 0:
        arr = arr.reshape(1, 1)
    elif arr.ndim == 1:
        arr = arr.reshape(1, -1)
    elif arr.ndim != 2:
        raise ShapeError(f"tensors are 2-D, got shape {arr.shape}")
    if arr.dtype not in _FLOAT_DTYPES:
        arr = arr.astype(np.float32)
    return np.ascontiguousarray(arr)


class Tensor:
    """A dense matrix. Wraps a 2-D float32/float64 numpy array."""

    __slots__ = ("data", "id")

    def __init__(self, data, dtype=None):
        self.data = _as_matrix(data, dtype)
        self.id = next(_next_id)

    @classmethod
    def _wrap(cls, arr):
        # internal fast path: arr is already a fresh, well-formed matrix
        t = cls.__new__(cls)
        t.data = arr
        t.id = next(_next_id)
        return t

    @property
    def shape(self):
        return self.data.shape

    @property
    def rows(self):
        return self.data.shape[0]

    @property
    def cols(self):
        return self.data.shape[1]

    @property
    def dtype(self):
        return self.data.dtype

    def item(self) -> float:
        if self.data.size != 1:
            raise UsageError(f"item() needs a 1x1 tensor, got {self.shape}")
        return float(self.data[0, 0])

    def copy(self) -> "Tensor":
        return Tensor._wrap(self.data.copy())

    def __repr__(self):
        return f"Tensor(shape={self.shape}, dtype={self.data.dtype})"


class Parameter(Tensor):
    """A trainable tensor with a persistent gradient buffer."""

    __slots__ = ("grad", "name")

    def __init__(self, data, name, dtype=None):
        super().__init__(data, dtype)
        self.grad = np.zeros_like(self.data)
        self.name = name

    def zero_grad(self):
        self.grad.fill(0.0)

    def __repr__(self):
        return f"Parameter({self.name!r}, shape={self.shape}, dtype={self.data.dtype})"


class Tape:
    """Ordered record of ops; replayed in reverse by `backward`."""

    __slots__ = ("_entries",)

    def __init__(self):
        self._entries = []

    def record(self, inputs, out, backward_fn):
        """backward_fn maps d(loss)/d(out) to a tuple of input grads
        (entries may be None for non-differentiable inputs)."""
        self._entries.append((tuple(inputs), out.id, backward_fn))

    def __len__(self):
        return len(self._entries)


def backward(loss, tape):
    """Accumulate d(loss)/d(p) into `p.grad` for every reachable Parameter.

    `loss` must be a 1x1 tensor produced through ops recorded on `tape`.
    """
    if loss.shape != (1, 1):
        raise UsageError(f"backward needs a scalar loss, got shape {loss.shape}")
    grads = {loss.id: np.ones((1, 1), dtype=loss.data.dtype)}
    for inputs, out_id, backward_fn in reversed(tape._entries):
        g_out = grads.pop(out_id, None)
        if g_out is None:
            continue
        for tensor_in, g_in in zip(inputs, backward_fn(g_out)):
            if g_in is None:
                continue
            if isinstance(tensor_in, Parameter):
                np.add(tensor_in.grad, g_in, out=tensor_in.grad)
            else:
                acc = grads.get(tensor_in.id)
                grads[tensor_in.id] = g_in if acc is None else acc + g_in


# ---------------------------------------------------------------------------
# ops


def matmul(a, b, tape):
    if a.cols != b.rows:
        raise ShapeError(f"matmul: inner dims differ, {a.shape} x {b.shape}")
    out = Tensor._wrap(a.data @ b.data)
    if tape is not None:
        ad, bd = a.data, b.data

        def grad(g):
            return g @ bd.T, ad.T @ g

        tape.record((a, b), out, grad)
    return out


def add(a, b, tape):
    """Elementwise add; either operand may be 1x1 (scalar broadcast)."""
    if a.shape != b.shape and a.shape != (1, 1) and b.shape != (1, 1):
        raise ShapeError(f"add: shapes differ, {a.shape} vs {b.shape}")
    out = Tensor._wrap(a.data + b.data)
    if tape is not None:

        def grad(g):
            ga = g if a.shape == g.shape else g.sum().reshape(1, 1)
            gb = g if b.shape == g.shape else g.sum().reshape(1, 1)
            return ga, gb

        tape.record((a, b), out, grad)
    return out


def add_row(x, bias, tape):
    """Add a 1xC row vector to every row of x."""
    if bias.shape != (1, x.cols):
        raise ShapeError(f"add_row: bias {bias.shape} does not match {x.shape}")
    out = Tensor._wrap(x.data + bias.data)
    if tape is not None:
        tape.record((x, bias), out, lambda g: (g, g.sum(axis=0, keepdims=True)))
    return out


def scale(x, factor, tape):
    c = float(factor)
    out = Tensor._wrap(x.data * c)
    if tape is not None:
        tape.record((x,), out, lambda g: (g * c,))
    return out


def square(x, tape):
    out = Tensor._wrap(x.data * x.data)
    if tape is not None:
        xd = x.data
        tape.record((x,), out, lambda g: (2.0 * xd * g,))
    return out


def sum_all(x, tape):
    out = Tensor._wrap(x.data.sum(dtype=x.data.dtype).reshape(1, 1))
    if tape is not None:
        shape, dt = x.shape, x.data.dtype
        tape.record((x,), out, lambda g: (np.full(shape, g[0, 0], dtype=dt),))
    return out


def mean_all(x, tape):
    n = x.data.size
    out = Tensor._wrap((x.data.sum(dtype=x.data.dtype) / n).reshape(1, 1))
    if tape is not None:
        shape, dt = x.shape, x.data.dtype
        tape.record((x,), out, lambda g: (np.full(shape, g[0, 0] / n, dtype=dt),))
    return out


def relu(x, tape):
    out = Tensor._wrap(np.maximum(x.data, 0))
    if tape is not None:
        mask = x.data > 0
        tape.record((x,), out, lambda g: (g * mask,))
    return out


def elu(x, tape):
    xd = x.data
    neg = xd < 0
    out_data = xd.copy()
    out_data[neg] = np.expm1(xd[neg])
    out = Tensor._wrap(out_data)
    if tape is not None:
        deriv = np.ones_like(xd)
        deriv[neg] = out_data[neg] + 1.0
        tape.record((x,), out, lambda g: (g * deriv,))
    return out


def _sigmoid_array(x):
    # branch-split so a large positive argument is never exponentiated
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    # keep the output strictly inside (0, 1) even under saturation
    tiny = np.nextafter(x.dtype.type(0), x.dtype.type(1))
    top = np.nextafter(x.dtype.type(1), x.dtype.type(0))
    return np.clip(out, tiny, top)


def sigmoid(x, tape=None):
    s = _sigmoid_array(x.data)
    out = Tensor._wrap(s)
    if tape is not None:
        tape.record((x,), out, lambda g: (g * s * (1.0 - s),))
    return out


def softmax_rows(x, tape):
    shifted = x.data - x.data.max(axis=1, keepdims=True)
    e = np.exp(shifted)
    z = e / e.sum(axis=1, keepdims=True)
    out = Tensor._wrap(z)
    if tape is not None:

        def grad(g):
            return (z * (g - (g * z).sum(axis=1, keepdims=True)),)

        tape.record((x,), out, grad)
    return out


def dropout(x, rate, rng, training, tape):
    """Inverted dropout: zero entries with probability `rate`, scale
    survivors by 1/(1-rate). Identity when not training or rate == 0."""
    rate = float(rate)
    if not 0.0 <= rate < 1.0:
        raise ConfigError(f"dropout rate must be in [0, 1), got {rate}")
    if not training or rate == 0.0:
        return x
    keep = rng.random(x.shape) >= rate
    m = keep.astype(x.data.dtype) * x.data.dtype.type(1.0 / (1.0 - rate))
    out = Tensor._wrap(x.data * m)
    if tape is not None:
        tape.record((x,), out, lambda g: (g * m,))
    return out

"""Compressed-row sparse matrices and sparse x dense products.

Storage is classic CSR: `indptr` (row offsets), `indices` (column ids,
strictly increasing within each row), `values`. Explicit zeros are never
stored. Values are kept in float64 and cast to the dense operand's dtype
at multiply time, so the same matrix serves float32 training and float64
verification.

Sparse matrices are constants with respect to differentiation: gradient
flows only into the dense operand of `spmm`.
"""

from __future__ import annotations

import numpy as np

from .errors import ShapeError, UsageError
from .tensor import Tensor


class SparseMatrix:
    __slots__ = ("rows", "cols", "indptr", "indices", "values", "symmetric", "_t")

    def __init__(self, rows, cols, indptr, indices, values, symmetric=False):
        self.rows = int(rows)
        self.cols = int(cols)
        self.indptr = np.asarray(indptr, dtype=np.int64)
        self.indices = np.asarray(indices, dtype=np.int64)
        self.values = np.asarray(values, dtype=np.float64)
        self.symmetric = bool(symmetric)
        self._t = None
        if self.indptr.shape != (self.rows + 1,):
            raise UsageError(f"indptr must have length rows+1, got {self.indptr.shape}")
        if self.indptr[0] != 0 or self.indptr[-1] != len(self.indices):
            raise UsageError("indptr endpoints do not match nnz")
        if len(self.indices) != len(self.values):
            raise UsageError("indices and values lengths differ")

    @classmethod
    def from_coo(cls, rows, cols, row_ids, col_ids, values, symmetric=False):
        """Build from triplets. Entries are sorted row-major; duplicate
        coordinates are rejected; zero values are dropped."""
        row_ids = np.asarray(row_ids, dtype=np.int64)
        col_ids = np.asarray(col_ids, dtype=np.int64)
        values = np.asarray(values, dtype=np.float64)
        if not (len(row_ids) == len(col_ids) == len(values)):
            raise UsageError("triplet arrays must have equal length")
        if len(row_ids) and (row_ids.min() < 0 or row_ids.max() >= rows):
            raise UsageError("row index out of range")
        if len(col_ids) and (col_ids.min() < 0 or col_ids.max() >= cols):
            raise UsageError("column index out of range")
        nonzero = values != 0.0
        row_ids, col_ids, values = row_ids[nonzero], col_ids[nonzero], values[nonzero]
        order = np.lexsort((col_ids, row_ids))
        row_ids, col_ids, values = row_ids[order], col_ids[order], values[order]
        if len(row_ids) > 1:
            same = (np.diff(row_ids) == 0) & (np.diff(col_ids) == 0)
            if same.any():
                k = int(np.flatnonzero(same)[0])
                raise UsageError(f"duplicate entry at ({row_ids[k]}, {col_ids[k]})")
        indptr = np.zeros(rows + 1, dtype=np.int64)
        np.cumsum(np.bincount(row_ids, minlength=rows), out=indptr[1:])
        return cls(rows, cols, indptr, col_ids, values, symmetric=symmetric)

    @classmethod
    def identity(cls, n):
        idx = np.arange(n, dtype=np.int64)
        return cls(n, n, np.arange(n + 1), idx, np.ones(n), symmetric=True)

    @classmethod
    def from_dense(cls, arr):
        arr = np.asarray(arr, dtype=np.float64)
        r, c = np.nonzero(arr)
        return cls.from_coo(arr.shape[0], arr.shape[1], r, c, arr[r, c])

    @property
    def nnz(self) -> int:
        return len(self.values)

    @property
    def shape(self):
        return (self.rows, self.cols)

    def row_nonzeros(self, i):
        """(column ids, values) views for row i."""
        lo, hi = self.indptr[i], self.indptr[i + 1]
        return self.indices[lo:hi], self.values[lo:hi]

    def row_ids_expanded(self):
        """Row id of every stored entry, in storage order."""
        counts = np.diff(self.indptr)
        return np.repeat(np.arange(self.rows, dtype=np.int64), counts)

    def to_dense(self, dtype=np.float64):
        out = np.zeros((self.rows, self.cols), dtype=dtype)
        out[self.row_ids_expanded(), self.indices] = self.values.astype(dtype)
        return out

    def transpose(self) -> "SparseMatrix":
        """CSR of the transpose; computed once and cached."""
        if self._t is None:
            rows_of = self.row_ids_expanded()
            order = np.argsort(self.indices, kind="stable")
            indptr_t = np.zeros(self.cols + 1, dtype=np.int64)
            np.cumsum(np.bincount(self.indices, minlength=self.cols), out=indptr_t[1:])
            self._t = SparseMatrix(
                self.cols, self.rows, indptr_t, rows_of[order], self.values[order],
                symmetric=self.symmetric,
            )
        return self._t

    def scaled_values(self, mask, factor) -> "SparseMatrix":
        """New matrix keeping only entries where mask is True, with kept
        values multiplied by `factor`. Structure is rebuilt (no stored zeros)."""
        mask = np.asarray(mask, dtype=bool)
        rows_of = self.row_ids_expanded()[mask]
        indptr = np.zeros(self.rows + 1, dtype=np.int64)
        np.cumsum(np.bincount(rows_of, minlength=self.rows), out=indptr[1:])
        return SparseMatrix(
            self.rows, self.cols, indptr, self.indices[mask], self.values[mask] * factor
        )


def _csr_times_dense(s: SparseMatrix, dense: np.ndarray) -> np.ndarray:
    """Row-segment sums over CSR entries. reduceat applies a fixed
    (pairwise) summation tree over the storage order, so results are
    bitwise reproducible run to run."""
    out_dtype = dense.dtype
    if s.nnz == 0:
        return np.zeros((s.rows, dense.shape[1]), dtype=out_dtype)
    contrib = s.values.astype(out_dtype)[:, None] * dense[s.indices]
    # a zero pad row keeps every indptr offset addressable by reduceat
    # (reduceat cannot index one-past-the-end); empty rows come out as
    # stray single elements and are zeroed afterwards
    contrib = np.concatenate([contrib, np.zeros((1, contrib.shape[1]), dtype=out_dtype)])
    out = np.add.reduceat(contrib, s.indptr[:-1], axis=0)
    counts = np.diff(s.indptr)
    if (counts == 0).any():
        out[counts == 0] = 0.0
    return out


def spmm(s: SparseMatrix, d: Tensor, tape) -> Tensor:
    """Sparse @ dense. Gradient flows into the dense operand only."""
    if s.cols != d.rows:
        raise ShapeError(f"spmm: inner dims differ, {s.shape} x {d.shape}")
    out = Tensor._wrap(_csr_times_dense(s, d.data))
    if tape is not None:
        st = s.transpose()
        tape.record((d,), out, lambda g: (_csr_times_dense(st, g),))
    return out


def dropout_sparse(s: SparseMatrix, rate, rng, training) -> SparseMatrix:
    """Inverted dropout over the stored entries of a constant sparse matrix.

    Structural zeros are untouched (dropping them would be a no-op); kept
    entries are scaled by 1/(1-rate). Returns `s` itself when inactive.
    """
    rate = float(rate)
    if not 0.0 <= rate < 1.0:
        from .errors import ConfigError

        raise ConfigError(f"dropout rate must be in [0, 1), got {rate}")
    if not training or rate == 0.0:
        return s
    keep = rng.random(s.nnz) >= rate
    return s.scaled_values(keep, 1.0 / (1.0 - rate))

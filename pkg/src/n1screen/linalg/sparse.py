from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import _kernels


class DimensionMismatch(ValueError):
    pass


@dataclass
class SparseMatrix:
    """Square matrix in compressed-row storage, columns sorted within each row.

    Explicit zeros are allowed and kept; patched matrices rely on that to
    keep the sparsity pattern of the matrix they were derived from.
    """

    n: int
    row_ptr: np.ndarray
    col_idx: np.ndarray
    values: np.ndarray

    @classmethod
    def from_triplets(cls, n: int, rows, cols, vals) -> SparseMatrix:
        """Assemble from (row, col, value) triplets; duplicates are summed."""
        rows = np.asarray(rows, dtype=np.int64)
        cols = np.asarray(cols, dtype=np.int64)
        vals = np.asarray(vals, dtype=float)
        if rows.size:
            order = np.lexsort((cols, rows))
            rows, cols, vals = rows[order], cols[order], vals[order]
            key = rows * n + cols
            first = np.ones(key.size, dtype=bool)
            first[1:] = key[1:] != key[:-1]
            starts = np.flatnonzero(first)
            # sequential summation keeps the result independent of numpy's pairwise reduce
            summed = np.array([sum(vals[a:b].tolist()) for a, b in zip(starts, list(starts[1:]) + [key.size])])
            rows, cols, vals = rows[starts], cols[starts], summed
        row_ptr = np.zeros(n + 1, dtype=np.int64)
        np.add.at(row_ptr, rows + 1, 1)
        np.cumsum(row_ptr, out=row_ptr)
        return cls(n, row_ptr, cols.copy(), vals.astype(float))

    @classmethod
    def from_dense(cls, a) -> SparseMatrix:
        a = np.asarray(a, dtype=float)
        if a.ndim != 2 or a.shape[0] != a.shape[1]:
            raise DimensionMismatch(f"expected a square matrix, got shape {a.shape}")
        rows, cols = np.nonzero(a)
        return cls.from_triplets(a.shape[0], rows, cols, a[rows, cols])

    @classmethod
    def identity(cls, n: int) -> SparseMatrix:
        k = np.arange(n)
        return cls.from_triplets(n, k, k, np.ones(n))

    def to_dense(self) -> np.ndarray:
        out = np.zeros((self.n, self.n))
        rows = np.repeat(np.arange(self.n), np.diff(self.row_ptr))
        np.add.at(out, (rows, self.col_idx), self.values)
        return out

    def copy(self) -> SparseMatrix:
        return SparseMatrix(self.n, self.row_ptr.copy(), self.col_idx.copy(), self.values.copy())

    @property
    def nnz(self) -> int:
        return int(self.row_ptr[-1])

    def position(self, i: int, j: int) -> int:
        """Storage slot of entry (i, j), or -1 if structurally absent."""
        a, b = self.row_ptr[i], self.row_ptr[i + 1]
        k = a + int(np.searchsorted(self.col_idx[a:b], j))
        return k if k < b and self.col_idx[k] == j else -1

    def get(self, i: int, j: int) -> float:
        k = self.position(i, j)
        return float(self.values[k]) if k >= 0 else 0.0

    def diagonal(self) -> np.ndarray:
        return np.array([self.get(i, i) for i in range(self.n)])

    def max_abs(self) -> float:
        return float(np.abs(self.values).max()) if self.values.size else 0.0

    def is_structurally_symmetric(self) -> bool:
        rows = np.repeat(np.arange(self.n), np.diff(self.row_ptr))
        fwd = set(zip(rows.tolist(), self.col_idx.tolist()))
        return all((j, i) in fwd for i, j in fwd)

    def __matmul__(self, v):
        return spmv_csr(self, v)


def spmv_csr(a: SparseMatrix, v) -> np.ndarray:
    """y = A v, accumulating each row in ascending column order."""
    v = np.ascontiguousarray(v, dtype=float)
    if v.shape != (a.n,):
        raise DimensionMismatch(f"vector of shape {v.shape} for a {a.n}x{a.n} matrix")
    return _kernels.csr_matvec(a.row_ptr, a.col_idx, a.values, v)

"""Sparse LU and ILU(0) with forward/backward substitution."""

from __future__ import annotations

import threading
from collections import Counter
from dataclasses import dataclass

import numpy as np

from . import _kernels
from .sparse import DimensionMismatch, SparseMatrix

PIVOT_RTOL = 1e-10


class SingularError(ArithmeticError):
    """Zero pivot during complete LU; ``row`` is the internal row index."""

    def __init__(self, row: int, pivot_threshold: float):
        super().__init__(f"zero pivot at row {row} (|pivot| <= {pivot_threshold:.3g})")
        self.row = row


class ZeroPivot(ArithmeticError):
    def __init__(self, row: int):
        super().__init__(f"zero pivot at row {row}")
        self.row = row


_lock = threading.Lock()
_factor_counts: Counter = Counter()


def factorization_count(kind: str | None = None) -> int:
    """Number of factorizations performed in this process (``"lu"``, ``"ilu0"`` or both)."""
    with _lock:
        return _factor_counts[kind] if kind else sum(_factor_counts.values())


def reset_factorization_count() -> None:
    with _lock:
        _factor_counts.clear()


def _count(kind: str) -> None:
    with _lock:
        _factor_counts[kind] += 1


@dataclass(frozen=True)
class LuFactors:
    """Triangular factors: unit-lower ``L`` (diagonal implied) and upper ``U``."""

    n: int
    Lp: np.ndarray
    Li: np.ndarray
    Lx: np.ndarray
    Up: np.ndarray
    Ui: np.ndarray
    Ux: np.ndarray
    Ud: np.ndarray
    complete: bool

    @property
    def L(self) -> SparseMatrix:
        return SparseMatrix(self.n, self.Lp, self.Li, self.Lx)

    @property
    def U(self) -> SparseMatrix:
        rows = np.repeat(np.arange(self.n), np.diff(self.Up))
        k = np.arange(self.n)
        return SparseMatrix.from_triplets(
            self.n, np.concatenate([rows, k]), np.concatenate([self.Ui, k]), np.concatenate([self.Ux, self.Ud])
        )

    @property
    def nnz(self) -> int:
        return len(self.Lx) + len(self.Ux) + self.n

    def solve(self, b) -> np.ndarray:
        b = np.ascontiguousarray(b, dtype=float)
        if b.shape != (self.n,):
            raise DimensionMismatch(f"rhs of shape {b.shape} for factors of order {self.n}")
        return _kernels.lu_apply(self.Lp, self.Li, self.Lx, self.Up, self.Ui, self.Ux, self.Ud, b)


def _factor(a: SparseMatrix, fill: bool):
    threshold = PIVOT_RTOL * a.max_abs()
    bad, *arrays = _kernels.factorize(a.row_ptr, a.col_idx, a.values, fill, threshold)
    return int(bad), threshold, arrays


def lu_factor(a: SparseMatrix) -> LuFactors:
    """Complete LU with diagonal pivoting and no reordering.

    Raises:
        SingularError: a pivot with magnitude <= 1e-10 * max|A|.
    """
    _count("lu")
    bad, threshold, arrays = _factor(a, fill=True)
    if bad >= 0:
        raise SingularError(bad, threshold)
    return LuFactors(a.n, *arrays, complete=True)


def lu_solve(factors: LuFactors, b) -> np.ndarray:
    return factors.solve(b)


def ilu0_factor(a: SparseMatrix) -> LuFactors:
    """Incomplete LU restricted to the sparsity pattern of ``a``."""
    _count("ilu0")
    bad, _, arrays = _factor(a, fill=False)
    if bad >= 0:
        raise ZeroPivot(bad)
    return LuFactors(a.n, *arrays, complete=False)

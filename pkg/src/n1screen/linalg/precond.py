from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

import numpy as np

from .factor import LuFactors, ZeroPivot, ilu0_factor, lu_factor
from .sparse import SparseMatrix


class PrecondKind(str, Enum):
    IDENTITY = "Identity"
    JACOBI = "Jacobi"
    ILU0 = "ILU0"
    FULL_LU = "FullLU"


@dataclass(frozen=True)
class Preconditioner:
    """Action z = M^-1 r of one of the four supported preconditioners."""

    kind: PrecondKind
    inv_diag: np.ndarray | None = None
    factors: LuFactors | None = None

    def apply(self, r) -> np.ndarray:
        if self.kind is PrecondKind.IDENTITY:
            return np.array(r, dtype=float)
        if self.kind is PrecondKind.JACOBI:
            return self.inv_diag * r
        return self.factors.solve(r)

    __call__ = apply


IDENTITY = Preconditioner(PrecondKind.IDENTITY)


def identity_preconditioner() -> Preconditioner:
    return IDENTITY


def jacobi_from_diagonal(diag) -> Preconditioner:
    diag = np.asarray(diag, dtype=float)
    zero = np.flatnonzero(diag == 0)
    if zero.size:
        raise ZeroPivot(int(zero[0]))
    return Preconditioner(PrecondKind.JACOBI, inv_diag=1.0 / diag)


def jacobi_preconditioner(a: SparseMatrix) -> Preconditioner:
    return jacobi_from_diagonal(a.diagonal())


def ilu0_preconditioner(a: SparseMatrix) -> Preconditioner:
    return Preconditioner(PrecondKind.ILU0, factors=ilu0_factor(a))


def lu_preconditioner(a: SparseMatrix) -> Preconditioner:
    return Preconditioner(PrecondKind.FULL_LU, factors=lu_factor(a))


def make_preconditioner(kind: PrecondKind, a: SparseMatrix) -> Preconditioner:
    if kind is PrecondKind.IDENTITY:
        return IDENTITY
    if kind is PrecondKind.JACOBI:
        return jacobi_preconditioner(a)
    if kind is PrecondKind.ILU0:
        return ilu0_preconditioner(a)
    return lu_preconditioner(a)

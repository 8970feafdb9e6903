"""Sparse storage, LU/ILU(0) factorization, preconditioners and PCG."""

from .factor import (
    LuFactors,
    SingularError,
    ZeroPivot,
    factorization_count,
    ilu0_factor,
    lu_factor,
    lu_solve,
    reset_factorization_count,
)
from .graph_spmv import BDOUBLEPRIME, BPRIME, GraphOperator, spmv_graph
from .pcg import BreakdownError, CgReport, pcg_solve
from .precond import (
    IDENTITY,
    PrecondKind,
    Preconditioner,
    identity_preconditioner,
    ilu0_preconditioner,
    jacobi_from_diagonal,
    jacobi_preconditioner,
    lu_preconditioner,
    make_preconditioner,
)
from .sparse import DimensionMismatch, SparseMatrix, spmv_csr

__all__ = [
    "BDOUBLEPRIME",
    "BPRIME",
    "BreakdownError",
    "CgReport",
    "DimensionMismatch",
    "GraphOperator",
    "IDENTITY",
    "LuFactors",
    "PrecondKind",
    "Preconditioner",
    "SingularError",
    "SparseMatrix",
    "ZeroPivot",
    "factorization_count",
    "identity_preconditioner",
    "ilu0_factor",
    "ilu0_preconditioner",
    "jacobi_from_diagonal",
    "jacobi_preconditioner",
    "lu_factor",
    "lu_preconditioner",
    "lu_solve",
    "make_preconditioner",
    "pcg_solve",
    "reset_factorization_count",
    "spmv_csr",
    "spmv_graph",
]

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .precond import IDENTITY, Preconditioner

DEFAULT_TOL = 1e-8


class BreakdownError(ArithmeticError):
    """p^T A p <= 0: the operator is not positive definite."""


@dataclass
class CgReport:
    iterations: int
    final_residual_norm: float
    converged: bool
    solution: np.ndarray


def _apply(apply_a, p):
    out = apply_a(p)
    if isinstance(out, tuple):
        return out
    return out, float(p @ out)


def pcg_solve(apply_a, b, x0=None, M: Preconditioner = IDENTITY, tol: float = DEFAULT_TOL,
              max_iter: int | None = None, callback=None) -> CgReport:
    """Preconditioned conjugate gradient.

    ``apply_a(p)`` returns ``A p`` or the pair ``(A p, p^T A p)`` (the
    graph operator accumulates the scalar during its sweep). The loop stops
    when ``||r_k||_2 <= tol * ||b||_2`` or after ``max_iter`` (default 2n)
    steps. ``callback(k, x_k)`` sees every iterate.

    The reported residual norm is recomputed as ``||b - A x||_2`` on exit.
    """
    b = np.asarray(b, dtype=float)
    n = b.shape[0]
    if max_iter is None:
        max_iter = 2 * n
    if x0 is None or not np.any(x0):
        x = np.zeros(n)
        r = b.copy()
    else:
        x = np.array(x0, dtype=float)
        r = b - _apply(apply_a, x)[0]
    threshold = tol * math.sqrt(b @ b)

    k = 0
    if math.sqrt(r @ r) > threshold:
        z = M.apply(r)
        p = z.copy()
        rz = float(r @ z)
        while k < max_iter:
            k += 1
            ap, pap = _apply(apply_a, p)
            if not pap > 0:
                raise BreakdownError(f"p^T A p = {pap:.3e} at iteration {k}")
            alpha = rz / pap  # step length
            x += alpha * p  # approximate solution
            r -= alpha * ap  # residual
            if callback is not None:
                callback(k, x)
            if math.sqrt(r @ r) <= threshold:
                break
            z = M.apply(r)
            rz_new = float(z @ r)
            beta = rz_new / rz  # improvement
            rz = rz_new
            p = z + beta * p  # search direction

    true_r = b - _apply(apply_a, x)[0]
    res = math.sqrt(true_r @ true_r)
    return CgReport(iterations=k, final_residual_norm=res, converged=res <= threshold, solution=x)

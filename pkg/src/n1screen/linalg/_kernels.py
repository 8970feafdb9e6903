"""Compiled inner loops for CSR products, factorization and triangular solves."""

import numba as nb
import numpy as np

_jit = nb.njit(cache=True, nogil=True)


@_jit
def csr_matvec(indptr, indices, data, x):
    n = indptr.shape[0] - 1
    y = np.zeros(n)
    for i in range(n):
        acc = 0.0
        for q in range(indptr[i], indptr[i + 1]):
            acc += data[q] * x[indices[q]]
        y[i] = acc
    return y


@_jit
def _grow_i(a, need):
    if need <= a.shape[0]:
        return a
    b = np.empty(max(need, 2 * a.shape[0]), dtype=a.dtype)
    b[: a.shape[0]] = a
    return b


@_jit
def _grow_f(a, need):
    if need <= a.shape[0]:
        return a
    b = np.empty(max(need, 2 * a.shape[0]), dtype=a.dtype)
    b[: a.shape[0]] = a
    return b


@_jit
def factorize(indptr, indices, data, fill, threshold):
    """Row-wise (IKJ) Doolittle elimination with diagonal pivots only.

    ``fill=False`` restricts every row to the pattern of A (ILU(0));
    ``fill=True`` keeps all fill-in (complete LU). Column indices of A must
    be sorted within rows.

    Returns ``(bad_row, Lp, Li, Lx, Up, Ui, Ux, Ud)``; L is strictly lower
    with unit diagonal implied, U is strictly upper with its diagonal in
    ``Ud``. ``bad_row`` is -1 on success, otherwise the first row whose
    pivot magnitude is <= ``threshold``.
    """
    n = indptr.shape[0] - 1
    cap = max(2 * indices.shape[0], 16)
    Lp = np.zeros(n + 1, dtype=np.int64)
    Up = np.zeros(n + 1, dtype=np.int64)
    Li = np.empty(cap, dtype=np.int64)
    Lx = np.empty(cap)
    Ui = np.empty(cap, dtype=np.int64)
    Ux = np.empty(cap)
    Ud = np.zeros(n)
    w = np.zeros(n)
    mark = np.full(n, -1, dtype=np.int64)
    nl = 0
    nu = 0
    for i in range(n):
        lo = n
        for q in range(indptr[i], indptr[i + 1]):
            j = indices[q]
            w[j] = data[q]
            mark[j] = i
            if j < lo:
                lo = j
        if not mark[i] == i:
            w[i] = 0.0
            if fill:
                mark[i] = i
        if fill:
            for k in range(lo, i):
                if mark[k] != i:
                    continue
                lik = w[k] / Ud[k]
                w[k] = lik
                for q in range(Up[k], Up[k + 1]):
                    j = Ui[q]
                    if mark[j] != i:
                        mark[j] = i
                        w[j] = 0.0
                    w[j] -= lik * Ux[q]
        else:
            for p in range(indptr[i], indptr[i + 1]):
                k = indices[p]
                if k >= i:
                    break
                lik = w[k] / Ud[k]
                w[k] = lik
                for q in range(Up[k], Up[k + 1]):
                    j = Ui[q]
                    if mark[j] == i:
                        w[j] -= lik * Ux[q]
        piv = w[i] if mark[i] == i else 0.0
        if not abs(piv) > threshold:
            return i, Lp, Li, Lx, Up, Ui, Ux, Ud
        Ud[i] = piv
        if fill:
            for k in range(lo, i):
                if mark[k] == i:
                    Li = _grow_i(Li, nl + 1)
                    Lx = _grow_f(Lx, nl + 1)
                    Li[nl] = k
                    Lx[nl] = w[k]
                    nl += 1
            for j in range(i + 1, n):
                if mark[j] == i:
                    Ui = _grow_i(Ui, nu + 1)
                    Ux = _grow_f(Ux, nu + 1)
                    Ui[nu] = j
                    Ux[nu] = w[j]
                    nu += 1
        else:
            for q in range(indptr[i], indptr[i + 1]):
                j = indices[q]
                if j < i:
                    Li = _grow_i(Li, nl + 1)
                    Lx = _grow_f(Lx, nl + 1)
                    Li[nl] = j
                    Lx[nl] = w[j]
                    nl += 1
                elif j > i:
                    Ui = _grow_i(Ui, nu + 1)
                    Ux = _grow_f(Ux, nu + 1)
                    Ui[nu] = j
                    Ux[nu] = w[j]
                    nu += 1
        Lp[i + 1] = nl
        Up[i + 1] = nu
    return -1, Lp, Li[:nl].copy(), Lx[:nl].copy(), Up, Ui[:nu].copy(), Ux[:nu].copy(), Ud


@_jit
def lu_apply(Lp, Li, Lx, Up, Ui, Ux, Ud, b):
    """Forward substitution with unit-lower L, then backward with U."""
    n = b.shape[0]
    y = b.copy()
    for i in range(n):
        acc = y[i]
        for q in range(Lp[i], Lp[i + 1]):
            acc -= Lx[q] * y[Li[q]]
        y[i] = acc
    for i in range(n - 1, -1, -1):
        acc = y[i]
        for q in range(Up[i], Up[i + 1]):
            acc -= Ux[q] * y[Ui[q]]
        y[i] = acc / Ud[i]
    return y

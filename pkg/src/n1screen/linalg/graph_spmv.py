"""Matrix-vector products swept over the power graph instead of a stored matrix.

Off-diagonal coefficients sit on edges (``bprime_off``/``bdp_off``),
diagonals on vertices. One product is a single superstep: every active
edge reads its endpoints' values of ``p`` from the previous step and sends
``coef * p[neighbour]`` to each end, each vertex combines its inbox with
``diag * p[self]``, and the global ``p^T A p`` is reduced after the
barrier. Messages are combined in ascending edge order, so the result does
not depend on how vertices would be scheduled.
"""

from __future__ import annotations

import numpy as np

from ..graph import PowerGraph, ScenarioOverlay, ScenarioView
from .sparse import DimensionMismatch

BPRIME = "bprime"
BDOUBLEPRIME = "bdoubleprime"


class GraphOperator:
    """Callable ``p -> (A p, p^T A p)`` for B' or B'' of one scenario view.

    Fixed rows (slack and deenergized vertices for B'; additionally PV
    vertices for B'') act as identity rows, and edges touching them or
    shielded by the outage send no messages.
    """

    def __init__(self, view: ScenarioView, matrix: str = BPRIME):
        g = view.graph
        if matrix == BPRIME:
            fixed, diag, coef = view.fixed_p, view.bprime_diag, g.bprime_off
        elif matrix == BDOUBLEPRIME:
            fixed, diag, coef = view.fixed_q, view.bdp_diag, g.bdp_off
        else:
            raise ValueError(f"unknown matrix {matrix!r}")
        act = view.edge_active & ~fixed[g.from_v] & ~fixed[g.to_v]
        self.n = g.n
        self.matrix = matrix
        self.fixed = fixed
        self.src = g.from_v[act]
        self.dst = g.to_v[act]
        self.coef = coef[act]
        self.diag = np.where(fixed, 1.0, diag)

    def diagonal(self) -> np.ndarray:
        return self.diag.copy()

    def __call__(self, p) -> tuple[np.ndarray, float]:
        p = np.asarray(p, dtype=float)
        if p.shape != (self.n,):
            raise DimensionMismatch(f"vector of shape {p.shape} for {self.n} vertices")
        n = self.n
        inbox = np.bincount(self.src, self.coef * p[self.dst], n) + np.bincount(self.dst, self.coef * p[self.src], n)
        ap = self.diag * p + inbox
        return ap, float(p @ ap)


def spmv_graph(graph: PowerGraph, overlay: ScenarioOverlay | None, p, matrix: str = BPRIME,
               base_dead=frozenset()) -> tuple[np.ndarray, float]:
    """Graph-form product with the scenario's B' (or B''); returns ``(A p, p^T A p)``."""
    return GraphOperator(ScenarioView(graph, overlay, base_dead), matrix)(p)

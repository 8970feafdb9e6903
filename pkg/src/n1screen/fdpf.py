"""Fast-decoupled power flow on the power graph.

Mismatches are accumulated per vertex from incident edges: each bus adds
the flow arriving over its in-service lines to its own shunt term, then
subtracts the total from its scheduled injection. The P-theta and Q-V
half steps solve B' and B'' systems with :func:`pcg_solve` over the graph
operator, or with direct LU for the reference path.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from .graph import PowerGraph, ScenarioOverlay, ScenarioView
from .linalg import (
    BDOUBLEPRIME,
    BPRIME,
    IDENTITY,
    GraphOperator,
    Preconditioner,
    PrecondKind,
    SparseMatrix,
    jacobi_from_diagonal,
    lu_factor,
    make_preconditioner,
    pcg_solve,
)
from .results import Violation

log = logging.getLogger(__name__)


class Mode(str, Enum):
    FULL = "full"
    QUICK = "quick"


class Diverged(RuntimeError):
    pass


@dataclass(frozen=True)
class CgOptions:
    tol: float = 1e-8
    max_iter: int | None = None  # None: 2n
    precond: PrecondKind = PrecondKind.FULL_LU


@dataclass(frozen=True)
class FdpfOptions:
    mismatch_tol: float = 1e-3
    max_outer: int = 50
    mode: Mode = Mode.FULL
    cg: CgOptions = field(default_factory=CgOptions)

    def __post_init__(self):
        if not self.mismatch_tol > 0:
            raise ValueError("mismatch_tol must be positive")


@dataclass
class SystemState:
    v_mag: np.ndarray
    v_ang: np.ndarray

    def copy(self) -> SystemState:
        return SystemState(self.v_mag.copy(), self.v_ang.copy())


@dataclass
class PowerFlowSolution:
    state: SystemState
    converged: bool
    outer_iterations: int
    total_cg_iterations: int
    max_p_mismatch: float
    max_q_mismatch: float


@dataclass(frozen=True)
class PrecondContext:
    """Preconditioners for the two half steps; None means build from the scenario's own matrix."""

    p_theta: Preconditioner | None = None
    q_v: Preconditioner | None = None


@dataclass
class BranchFlows:
    p_from: np.ndarray
    q_from: np.ndarray
    p_to: np.ndarray
    q_to: np.ndarray


def flat_start(graph: PowerGraph) -> SystemState:
    """|V| = 1 on PQ buses and the set point elsewhere; every angle at the slack angle."""
    v = np.where(graph.bus_type == 0, 1.0, graph.v_mag)
    return SystemState(v.astype(float), np.full(graph.n, graph.v_ang[graph.slack_index]))


def _view(graph, overlay, view, base_dead=frozenset()) -> ScenarioView:
    return view if view is not None else ScenarioView(graph, overlay, base_dead)


def _check_dims(graph: PowerGraph, state: SystemState):
    from .linalg import DimensionMismatch

    if state.v_mag.shape != (graph.n,) or state.v_ang.shape != (graph.n,):
        raise DimensionMismatch(f"state does not match a graph of {graph.n} vertices")


def _edge_terms(view: ScenarioView, state: SystemState):
    g = view.graph
    act = view.edge_active
    f, t = g.from_v[act], g.to_v[act]
    vm, va = state.v_mag, state.v_ang
    d = va[f] - va[t]
    c, s = np.cos(d), np.sin(d)
    vv = vm[f] * vm[t]
    return f, t, g.g_ft[act], g.b_ft[act], vv, c, s


def compute_p_mismatch(graph: PowerGraph, overlay: ScenarioOverlay | None, state: SystemState,
                       view: ScenarioView | None = None) -> np.ndarray:
    """dP_i = P_is - P_i,line - |V_i|^2 G_ii; zero at the slack and deenergized vertices."""
    view = _view(graph, overlay, view)
    _check_dims(graph, state)
    f, t, gft, bft, vv, c, s = _edge_terms(view, state)
    n = graph.n
    # each active edge delivers V_i V_j (G_ij cos th_ij + B_ij sin th_ij) to both ends
    p_line = np.bincount(f, vv * (gft * c + bft * s), n) + np.bincount(t, vv * (gft * c - bft * s), n)
    dp = view.p_sched - p_line - state.v_mag**2 * view.g_self
    dp[view.fixed_p] = 0.0
    return dp


def compute_q_mismatch(graph: PowerGraph, overlay: ScenarioOverlay | None, state: SystemState,
                       view: ScenarioView | None = None) -> np.ndarray:
    """dQ_i = Q_is - Q_i,line + |V_i|^2 B_ii; zero at PV, slack and deenergized vertices."""
    view = _view(graph, overlay, view)
    _check_dims(graph, state)
    f, t, gft, bft, vv, c, s = _edge_terms(view, state)
    n = graph.n
    q_line = np.bincount(f, vv * (gft * s - bft * c), n) + np.bincount(t, vv * (-gft * s - bft * c), n)
    dq = view.q_sched - q_line + state.v_mag**2 * view.b_self
    dq[view.fixed_q] = 0.0
    return dq


def _assemble(view: ScenarioView, fixed, diag, coef) -> SparseMatrix:
    g = view.graph
    act = view.edge_active & ~fixed[g.from_v] & ~fixed[g.to_v]
    f, t, w = g.from_v[act], g.to_v[act], coef[act]
    k = np.arange(g.n)
    rows = np.concatenate([k, f, t])
    cols = np.concatenate([k, t, f])
    vals = np.concatenate([np.where(fixed, 1.0, diag), w, w])
    return SparseMatrix.from_triplets(g.n, rows, cols, vals)


def build_bprime(graph: PowerGraph, overlay: ScenarioOverlay | None = None,
                 view: ScenarioView | None = None) -> SparseMatrix:
    """B' by the XB stencil: -1/x off the diagonal, sum of 1/x on it.

    Slack and deenergized rows/columns are replaced by identity rows.
    """
    view = _view(graph, overlay, view)
    return _assemble(view, view.fixed_p, view.bprime_diag, graph.bprime_off)


def build_bdoubleprime(graph: PowerGraph, overlay: ScenarioOverlay | None = None,
                       view: ScenarioView | None = None) -> SparseMatrix:
    """B'' = -Im(Y_bus) with taps, charging and shunts; identity rows at PV, slack, deenergized.

    Without phase shifters the two mutual entries of a branch are equal,
    so the (B + B^T)/2 symmetrization is exact; the residual asymmetry is
    logged at debug level.
    """
    view = _view(graph, overlay, view)
    b = _assemble(view, view.fixed_q, view.bdp_diag, graph.bdp_off)
    if log.isEnabledFor(logging.DEBUG):
        d = b.to_dense()
        log.debug("B'' asymmetry %.3e", float(np.abs(d - d.T).max()) if b.n else 0.0)
    return b


def _norms(view: ScenarioView, dp, dq) -> tuple[float, float]:
    mp = float(np.abs(dp).max()) if dp.size else 0.0
    mq = float(np.abs(dq).max()) if dq is not None and dq.size else 0.0
    return mp, mq


def _iterate(graph, overlay, view, initial, opts: FdpfOptions, solve_p, solve_q, on_step) -> PowerFlowSolution:
    if initial.v_mag.shape != (graph.n,):
        from .linalg import DimensionMismatch

        raise DimensionMismatch(f"initial state does not match a graph of {graph.n} vertices")
    state = initial.copy()
    dead = ~view.energized
    state.v_mag[dead] = 1.0
    state.v_ang[dead] = 0.0
    full = opts.mode is Mode.FULL

    best = math.inf
    outer = 0
    cg_total = 0
    converged = False
    while True:
        dp = compute_p_mismatch(graph, overlay, state, view)
        dq = compute_q_mismatch(graph, overlay, state, view) if full else None
        mp, mq = _norms(view, dp, dq)
        worst = max(mp, mq)
        if worst <= opts.mismatch_tol:
            converged = True
            break
        if not math.isfinite(worst) or worst > 10.0 * best:
            raise Diverged(f"mismatch {worst:.3e} after {outer} iterations (best {best:.3e})")
        best = min(best, worst)
        if outer >= opts.max_outer:
            break
        outer += 1

        rhs = dp / state.v_mag
        dth, its = solve_p(rhs)
        cg_total += its
        if on_step is not None:
            on_step("p", outer, rhs, dth)
        state.v_ang += dth

        if full:
            dq = compute_q_mismatch(graph, overlay, state, view)
            rhs = dq / state.v_mag
            dv, its = solve_q(rhs)
            cg_total += its
            if on_step is not None:
                on_step("q", outer, rhs, dv)
            state.v_mag += dv

    return PowerFlowSolution(state, converged, outer, cg_total, mp, mq)


def fdpf_solve(graph: PowerGraph, overlay: ScenarioOverlay | None, initial: SystemState,
               opts: FdpfOptions = FdpfOptions(), precond: PrecondContext | None = None,
               base_dead=frozenset(), on_step=None) -> PowerFlowSolution:
    """Fast-decoupled iteration with PCG half steps over the graph operators.

    Each outer iteration solves ``B' dth = dP/|V|`` and, in full mode,
    ``B'' dV = dQ/|V|`` with the current |V|; quick mode holds |V| at
    ``initial``. Preconditioners missing from ``precond`` are built from
    the scenario's own matrices with ``opts.cg.precond``.

    ``on_step(half, k, rhs, delta)`` is called after every linear solve.

    Raises:
        Diverged: the mismatch grew tenfold over its best value.
        BreakdownError: propagated from the inner solver.
    """
    view = ScenarioView(graph, overlay, base_dead)
    precond = precond or PrecondContext()
    op_p = GraphOperator(view, BPRIME)
    op_q = GraphOperator(view, BDOUBLEPRIME)
    mp = precond.p_theta or _own_preconditioner(opts.cg.precond, op_p, lambda: build_bprime(graph, view=view))
    mq = None
    if opts.mode is Mode.FULL:
        mq = precond.q_v or _own_preconditioner(opts.cg.precond, op_q, lambda: build_bdoubleprime(graph, view=view))

    def solve_with(op, m):
        def solve(rhs):
            rep = pcg_solve(op, rhs, None, m, opts.cg.tol, opts.cg.max_iter)
            return rep.solution, rep.iterations

        return solve

    return _iterate(graph, overlay, view, initial, opts, solve_with(op_p, mp), solve_with(op_q, mq), on_step)


def _own_preconditioner(kind: PrecondKind, op: GraphOperator, assemble) -> Preconditioner:
    if kind is PrecondKind.IDENTITY:
        return IDENTITY
    if kind is PrecondKind.JACOBI:
        return jacobi_from_diagonal(op.diagonal())
    return make_preconditioner(kind, assemble())


def fdpf_solve_lu(graph: PowerGraph, overlay: ScenarioOverlay | None, initial: SystemState,
                  opts: FdpfOptions = FdpfOptions(), base_dead=frozenset(), on_step=None) -> PowerFlowSolution:
    """Reference path: factorize this scenario's B' and B'' and solve directly.

    Nothing is reused between calls. The overlay is taken literally: an
    island that the overlay does not mark deenergized keeps its singular
    block and the factorization raises ``SingularError``.
    """
    view = ScenarioView(graph, overlay, base_dead)
    fp = lu_factor(build_bprime(graph, view=view))
    fq = lu_factor(build_bdoubleprime(graph, view=view)) if opts.mode is Mode.FULL else None
    return _iterate(
        graph, overlay, view, initial, opts,
        lambda rhs: (fp.solve(rhs), 0),
        lambda rhs: (fq.solve(rhs), 0),
        on_step,
    )


def branch_flows(graph: PowerGraph, overlay: ScenarioOverlay | None, state: SystemState,
                 view: ScenarioView | None = None) -> BranchFlows:
    """Pi-model sending and receiving end flows; zero on shielded or deenergized edges."""
    view = _view(graph, overlay, view)
    v = state.v_mag * np.exp(1j * state.v_ang)
    vf, vt = v[graph.from_v], v[graph.to_v]
    yff = graph.g_ff + 1j * graph.b_ff
    ytt = graph.g_tt + 1j * graph.b_tt
    yft = graph.g_ft + 1j * graph.b_ft
    s_from = vf * np.conj(yff * vf + yft * vt)
    s_to = vt * np.conj(yft * vf + ytt * vt)
    off = ~view.edge_active
    s_from[off] = 0.0
    s_to[off] = 0.0
    return BranchFlows(s_from.real.copy(), s_from.imag.copy(), s_to.real.copy(), s_to.imag.copy())


def check_violations(flows: BranchFlows, graph: PowerGraph) -> list[Violation]:
    """Edges whose larger end active flow exceeds a nonzero rating, worst first."""
    flow = np.maximum(np.abs(flows.p_from), np.abs(flows.p_to))
    out = []
    for e in np.flatnonzero(graph.in_service & (graph.rating > 0) & (flow > graph.rating)):
        e = int(e)
        pct = 100.0 * float(flow[e]) / float(graph.rating[e])
        out.append(Violation(e, int(graph.branch_id[e]), float(flow[e]), float(graph.rating[e]), pct))
    out.sort(key=lambda v: (-v.percent, v.edge))
    return out

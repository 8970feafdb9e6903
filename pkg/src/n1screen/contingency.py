"""N-1 screening: one scenario per in-service branch.

The base case is solved and B'/B'' are factorized once in
:func:`prepare_base`; every scenario then starts from the base-case state
and runs PCG on the outage-patched operators, preconditioned with those
base-case factors. Islands cut off by an outage are carried as identity
rows and their net injection is re-dispatched over main-island generators.
"""

from __future__ import annotations

import logging
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

from .fdpf import (
    Diverged,
    FdpfOptions,
    PowerFlowSolution,
    PrecondContext,
    branch_flows,
    build_bdoubleprime,
    build_bprime,
    check_violations,
    fdpf_solve,
    fdpf_solve_lu,
    flat_start,
)
from .graph import PowerGraph, ScenarioOverlay, ScenarioView, apply_outage, build_graph, connected_components
from .ingest import NetworkModel, has_errors, validate_network
from .linalg import (
    IDENTITY,
    BreakdownError,
    Preconditioner,
    PrecondKind,
    SingularError,
    SparseMatrix,
    ZeroPivot,
    make_preconditioner,
)
from .results import BaseCaseSummary, Participant, RedispatchRecord, ScenarioResult, ScreeningReport, Totals

log = logging.getLogger(__name__)

GPCG = "gpcg"
LUD = "lud"


class BaseCaseDiverged(RuntimeError):
    pass


class InvalidNetwork(ValueError):
    def __init__(self, diagnostics):
        super().__init__("; ".join(str(d) for d in diagnostics))
        self.diagnostics = diagnostics


class UnknownBranchInFilter(KeyError):
    pass


class NoParticipants(RuntimeError):
    pass


@dataclass(frozen=True)
class ScreeningOptions:
    fdpf: FdpfOptions = field(default_factory=FdpfOptions)
    solver: str = GPCG
    major_threshold: float = 0.0  # p.u.; generators above it share the re-dispatch

    def __post_init__(self):
        if self.solver not in (GPCG, LUD):
            raise ValueError(f"unknown solver {self.solver!r}")


@dataclass(frozen=True)
class ScenarioDescriptor:
    branch_id: int
    edge: int
    from_bus: int
    to_bus: int


@dataclass
class BaseCaseContext:
    graph: PowerGraph
    base_solution: PowerFlowSolution
    bprime_base: SparseMatrix
    base_precond: Preconditioner
    bdp_base: SparseMatrix
    bdp_precond: Preconditioner
    options: ScreeningOptions
    base_dead: frozenset = frozenset()
    bprime_factorizations: int = 0
    bdp_factorizations: int = 0
    base_summary: BaseCaseSummary | None = None


def prepare_base(model: NetworkModel, opts: ScreeningOptions = ScreeningOptions()) -> BaseCaseContext:
    """Build the graph, factorize B'/B'' of the base case once, and solve the base case.

    Raises:
        InvalidNetwork: validation reported errors.
        BaseCaseDiverged: the base case did not converge.
    """
    diags = validate_network(model)
    if has_errors(diags):
        raise InvalidNetwork([d for d in diags if d.severity.value == "Error"])
    t0 = time.perf_counter()
    graph = build_graph(model)
    part = connected_components(graph)
    base_dead = frozenset(v for island in part.islands for v in island)
    view = ScenarioView(graph, None, base_dead)
    bprime = build_bprime(graph, view=view)
    bdp = build_bdoubleprime(graph, view=view)

    kind = opts.fdpf.cg.precond
    factorizations = 0
    if opts.solver == GPCG and kind in (PrecondKind.ILU0, PrecondKind.FULL_LU):
        mp = make_preconditioner(kind, bprime)
        mq = make_preconditioner(kind, bdp)
        factorizations = 1
    else:
        mp = mq = IDENTITY

    try:
        if opts.solver == LUD:
            sol = fdpf_solve_lu(graph, None, flat_start(graph), opts.fdpf, base_dead)
        elif kind is PrecondKind.JACOBI:
            sol = fdpf_solve(graph, None, flat_start(graph), opts.fdpf, None, base_dead)
        else:
            sol = fdpf_solve(graph, None, flat_start(graph), opts.fdpf, PrecondContext(mp, mq), base_dead)
    except (Diverged, BreakdownError, SingularError, ZeroPivot) as exc:
        raise BaseCaseDiverged(f"base case failed: {exc}") from exc
    if not sol.converged:
        raise BaseCaseDiverged(
            f"base case did not converge in {sol.outer_iterations} iterations "
            f"(max dP {sol.max_p_mismatch:.3e}, max dQ {sol.max_q_mismatch:.3e})"
        )
    flows = branch_flows(graph, None, sol.state, view)
    summary = BaseCaseSummary(
        converged=True,
        outer_iterations=sol.outer_iterations,
        cg_iterations=sol.total_cg_iterations,
        max_p_mismatch=sol.max_p_mismatch,
        max_q_mismatch=sol.max_q_mismatch,
        violation_count=len(check_violations(flows, graph)),
        time_ms=round((time.perf_counter() - t0) * 1e3, 2),
    )
    return BaseCaseContext(graph, sol, bprime, mp, bdp, mq, opts, base_dead, factorizations, factorizations, summary)


def enumerate_scenarios(ctx: BaseCaseContext, branches=None) -> list[ScenarioDescriptor]:
    """One descriptor per in-service branch (or per listed branch id), ascending by id."""
    g = ctx.graph
    if branches is None:
        ids = sorted(int(b) for b in g.branch_id[g.in_service])
    else:
        ids = sorted(set(int(b) for b in branches))
        missing = [b for b in ids if b not in g.edge_of_branch or not g.in_service[g.edge_of_branch[b]]]
        if missing:
            raise UnknownBranchInFilter(f"no in-service branch with id {missing}")
    out = []
    for b in ids:
        e = g.edge_of_branch[b]
        out.append(ScenarioDescriptor(b, e, int(g.bus_id[g.from_v[e]]), int(g.bus_id[g.to_v[e]])))
    return out


def patch_matrix(bprime_base: SparseMatrix, graph: PowerGraph, overlay: ScenarioOverlay) -> SparseMatrix:
    """B' of the outage scenario derived from the base matrix by a local update.

    Removing branch i-j with reactance x changes A_ii, A_jj (-1/x each) and
    A_ij, A_ji (+1/x each); a slack endpoint keeps its identity row so only
    the other diagonal moves. Deenergized vertices then become identity
    rows. The sparsity pattern of the base matrix is kept.
    """
    a = bprime_base.copy()
    e = overlay.outaged_edge
    i, j = int(graph.from_v[e]), int(graph.to_v[e])
    inv_x = 1.0 / float(graph.x[e])
    slack = graph.slack_index
    if i != slack:
        a.values[a.position(i, i)] -= inv_x
    if j != slack:
        a.values[a.position(j, j)] -= inv_x
    if slack not in (i, j):
        a.values[a.position(i, j)] += inv_x
        a.values[a.position(j, i)] += inv_x
    if overlay.deenergized:
        dead = np.zeros(a.n, dtype=bool)
        dead[list(overlay.deenergized)] = True
        rows = np.repeat(np.arange(a.n), np.diff(a.row_ptr))
        touch = dead[rows] | dead[a.col_idx]
        a.values[touch] = 0.0
        for v in overlay.deenergized:
            a.values[a.position(v, v)] = 1.0
    return a


def redispatch(ctx: BaseCaseContext, overlay: ScenarioOverlay) -> tuple[ScenarioOverlay, RedispatchRecord]:
    """Spread the island's net scheduled injection over main-island generators.

    Participant k gets ``D * p_gen_k / sum(p_gen)`` where D is the net
    scheduled injection of the newly deenergized buses, so total scheduled
    injection over energized buses equals the pre-outage total.

    Raises:
        NoParticipants: no main-island bus generates more than the threshold.
    """
    g = ctx.graph
    island = sorted(overlay.deenergized - ctx.base_dead)
    net = sum(float(g.p_sched[v]) for v in island)
    dead = overlay.deenergized
    parts = [v for v in range(g.n) if v not in dead and g.p_gen[v] > ctx.options.major_threshold]
    if not parts:
        raise NoParticipants("main island has no generator above the participation threshold")
    total = sum(float(g.p_gen[v]) for v in parts)
    adjusted = dict(overlay.adjusted_p_sched)
    participants = []
    for v in parts:
        share = float(g.p_gen[v]) / total
        dp = net * share
        adjusted[v] = float(g.p_sched[v]) + dp
        participants.append(Participant(v, int(g.bus_id[v]), share, dp))
    record = RedispatchRecord(
        island_net_injection=net,
        participants=tuple(participants),
        island_gen_count=sum(1 for v in island if g.p_gen[v] > 0),
        island_load_count=sum(1 for v in island if g.p_load[v] > 0),
    )
    return replace(overlay, adjusted_p_sched=adjusted), record


def _scenario_precond(ctx: BaseCaseContext, kind: PrecondKind) -> PrecondContext:
    if kind in (PrecondKind.ILU0, PrecondKind.FULL_LU):
        return PrecondContext(ctx.base_precond, ctx.bdp_precond)
    if kind is PrecondKind.IDENTITY:
        return PrecondContext(IDENTITY, IDENTITY)
    return PrecondContext()  # Jacobi: taken from each scenario's own diagonal


def screen_scenario(ctx: BaseCaseContext, desc: ScenarioDescriptor, opts: ScreeningOptions | None = None,
                    on_step=None) -> ScenarioResult:
    """Screen one outage; failures are reported in ``failure_reason``, never raised."""
    opts = opts or ctx.options
    g = ctx.graph
    t0 = time.perf_counter()
    islanding = False
    dead_count = 0
    record = None
    sol = None
    reason = None
    violations = ()
    try:
        overlay = apply_outage(g, desc.edge)
        new_dead = overlay.deenergized - ctx.base_dead
        islanding = bool(new_dead)
        dead_count = len(new_dead)
        initial = ctx.base_solution.state
        if opts.solver == LUD:
            # the reference path knows nothing about islands
            overlay = ScenarioOverlay(desc.edge)
            sol = fdpf_solve_lu(g, overlay, initial, opts.fdpf, ctx.base_dead, on_step)
        else:
            if islanding:
                overlay, record = redispatch(ctx, overlay)
            precond = _scenario_precond(ctx, opts.fdpf.cg.precond)
            sol = fdpf_solve(g, overlay, initial, opts.fdpf, precond, ctx.base_dead, on_step)
        if sol.converged:
            flows = branch_flows(g, overlay, sol.state, ScenarioView(g, overlay, ctx.base_dead))
            violations = tuple(check_violations(flows, g))
        else:
            reason = f"NotConverged: max mismatch {max(sol.max_p_mismatch, sol.max_q_mismatch):.3e}"
    except SingularError as exc:
        reason = f"SingularError: {exc}"
    except NoParticipants as exc:
        reason = f"NoParticipants: {exc}"
    except Diverged as exc:
        reason = f"Diverged: {exc}"
    except Exception as exc:  # the sweep must complete
        log.exception("scenario for branch %s failed", desc.branch_id)
        reason = f"{type(exc).__name__}: {exc}"
    elapsed = round((time.perf_counter() - t0) * 1e3, 2)
    return ScenarioResult(
        branch_id=desc.branch_id,
        from_bus=desc.from_bus,
        to_bus=desc.to_bus,
        islanding=islanding,
        deenergized_count=dead_count,
        converged=bool(sol is not None and sol.converged and reason is None),
        outer_iterations=sol.outer_iterations if sol is not None else 0,
        cg_iterations_total=sol.total_cg_iterations if sol is not None else 0,
        time_ms=elapsed,
        violations=violations,
        redispatch=record,
        failure_reason=reason,
    )


def screen_all(ctx: BaseCaseContext, opts: ScreeningOptions | None = None, worker_count: int = 1,
               branches=None) -> ScreeningReport:
    """Screen every scenario; results are ordered by branch id whatever the worker count."""
    if worker_count < 1:
        raise ValueError("worker_count must be >= 1")
    opts = opts or ctx.options
    descs = enumerate_scenarios(ctx, branches)
    t0 = time.perf_counter()
    if worker_count == 1 or len(descs) <= 1:
        results = [screen_scenario(ctx, d, opts) for d in descs]
    else:
        with ThreadPoolExecutor(max_workers=worker_count) as pool:
            results = list(pool.map(lambda d: screen_scenario(ctx, d, opts), descs))
    results.sort(key=lambda r: r.branch_id)
    total = round((time.perf_counter() - t0) * 1e3, 2)
    return ScreeningReport(
        case_name=ctx.graph.case_name,
        solver=opts.solver,
        totals=Totals.of(results),
        total_time_ms=total,
        scenarios=tuple(results),
        base_case=ctx.base_summary,
    )

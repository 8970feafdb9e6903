"""Plain records passed between the solver, the screening loop and the writers."""

from __future__ import annotations

from dataclasses import dataclass, replace


@dataclass(frozen=True)
class Violation:
    edge: int
    branch_id: int
    flow_pu: float
    limit_pu: float
    percent: float


@dataclass(frozen=True)
class Participant:
    vertex: int
    bus_id: int
    share: float
    delta_p: float


@dataclass(frozen=True)
class RedispatchRecord:
    island_net_injection: float
    participants: tuple[Participant, ...]
    island_gen_count: int
    island_load_count: int


@dataclass(frozen=True)
class ScenarioResult:
    branch_id: int
    from_bus: int
    to_bus: int
    islanding: bool
    deenergized_count: int
    converged: bool
    outer_iterations: int
    cg_iterations_total: int
    time_ms: float
    violations: tuple[Violation, ...] = ()
    redispatch: RedispatchRecord | None = None
    failure_reason: str | None = None

    @property
    def worst_violation_pct(self) -> float:
        return max((v.percent for v in self.violations), default=0.0)


@dataclass(frozen=True)
class Totals:
    tested: int = 0
    converged: int = 0
    failed: int = 0
    islanding: int = 0
    lu_failures: int = 0

    @classmethod
    def of(cls, scenarios) -> Totals:
        conv = sum(s.converged for s in scenarios)
        return cls(
            tested=len(scenarios),
            converged=conv,
            failed=len(scenarios) - conv,
            islanding=sum(s.islanding for s in scenarios),
            lu_failures=sum(bool(s.failure_reason and s.failure_reason.startswith("SingularError")) for s in scenarios),
        )


@dataclass(frozen=True)
class BaseCaseSummary:
    converged: bool
    outer_iterations: int
    cg_iterations: int
    max_p_mismatch: float
    max_q_mismatch: float
    violation_count: int
    time_ms: float


@dataclass(frozen=True)
class ScreeningReport:
    case_name: str
    solver: str
    totals: Totals
    total_time_ms: float
    scenarios: tuple[ScenarioResult, ...] = ()
    base_case: BaseCaseSummary | None = None

    def with_zero_times(self) -> ScreeningReport:
        base = replace(self.base_case, time_ms=0.0) if self.base_case else None
        return replace(
            self,
            total_time_ms=0.0,
            scenarios=tuple(replace(s, time_ms=0.0) for s in self.scenarios),
            base_case=base,
        )

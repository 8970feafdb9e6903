import json
from dataclasses import replace

import numpy as np
import pytest

from oracles import dense_bprime, island_buses
from n1screen.contingency import (
    BaseCaseDiverged,
    InvalidNetwork,
    ScreeningOptions,
    UnknownBranchInFilter,
    enumerate_scenarios,
    patch_matrix,
    prepare_base,
    redispatch,
    screen_all,
    screen_scenario,
)
from n1screen.fdpf import CgOptions, FdpfOptions, build_bprime
from n1screen.graph import apply_outage
from n1screen.ingest import parse_json_network
from n1screen.linalg import PrecondKind, factorization_count, reset_factorization_count


def _model(buses, lines):
    """buses: (id, type, p_gen_mw, p_load_mw); lines: (from, to, x)."""
    return parse_json_network(json.dumps({
        "base_mva": 100,
        "buses": [
            {"id": i, "type": t, "p_gen": pg, "p_load": pl, "v_mag": 1.0} for i, t, pg, pl in buses
        ],
        "branches": [
            {"id": k + 1, "from": f, "to": to, "r": 0.01, "x": x, "rating_mva": 200}
            for k, (f, to, x) in enumerate(lines)
        ],
    }))


@pytest.fixture
def leaf_load():
    # bus 4 hangs off bus 3 and carries 10 MW of load
    return _model(
        [(1, "slack", 100, 0), (2, "pv", 50, 0), (3, "pq", 0, 140), (4, "pq", 0, 10)],
        [(1, 2, 0.1), (2, 3, 0.1), (1, 3, 0.1), (3, 4, 0.1)],
    )


class TestPrepare:
    def test_factorized_once(self, model14):
        reset_factorization_count()
        ctx = prepare_base(model14)
        assert ctx.base_solution.converged
        assert ctx.bprime_factorizations == 1
        # one factorization each for B' and B''
        assert factorization_count("lu") == 2
        screen_all(ctx)
        assert factorization_count("lu") == 2

    def test_ilu0_counter(self, model14):
        reset_factorization_count()
        prepare_base(model14, ScreeningOptions(FdpfOptions(cg=CgOptions(precond=PrecondKind.ILU0))))
        assert factorization_count("ilu0") == 2 and factorization_count("lu") == 0

    def test_stressed_base_case(self):
        m = _model([(1, "slack", 0, 0), (2, "pq", 0, 2000)], [(1, 2, 0.5)])
        with pytest.raises(BaseCaseDiverged):
            prepare_base(m, ScreeningOptions(FdpfOptions(mismatch_tol=1e-12)))

    def test_invalid_network(self):
        m = _model([(1, "slack", 0, 0), (2, "pq", 0, 10)], [(1, 2, 0.0)])
        with pytest.raises(InvalidNetwork) as exc:
            prepare_base(m)
        assert [d.code for d in exc.value.diagnostics] == ["ZeroReactance"]

    def test_ieee118(self, ctx118):
        assert ctx118.base_solution.converged
        assert ctx118.base_summary.outer_iterations == 4


class TestEnumerate:
    def test_all_branches(self, ctx118):
        descs = enumerate_scenarios(ctx118)
        assert len(descs) == 186
        assert [d.branch_id for d in descs] == sorted(d.branch_id for d in descs)

    def test_filter(self, ctx118):
        (d,) = enumerate_scenarios(ctx118, [5])
        assert d.branch_id == 5

    def test_unknown(self, ctx14):
        with pytest.raises(UnknownBranchInFilter):
            enumerate_scenarios(ctx14, [99])


class TestPatch:
    def test_four_entries(self, ctx14):
        g = ctx14.graph
        base = ctx14.bprime_base.to_dense()
        for e in range(g.m):
            ov = apply_outage(g, e)
            if ov.deenergized:
                continue
            diff = int(np.sum(patch_matrix(ctx14.bprime_base, g, ov).to_dense() != base))
            on_slack = g.slack_index in (g.from_v[e], g.to_v[e])
            assert diff == (1 if on_slack else 4)

    def test_equals_rebuild(self, ctx14):
        g = ctx14.graph
        for e in range(g.m):
            ov = apply_outage(g, e)
            patched = patch_matrix(ctx14.bprime_base, g, ov).to_dense()
            assert np.max(np.abs(patched - build_bprime(g, ov).to_dense())) <= 1e-12

    def test_equals_dense_oracle(self, ctx118, model118):
        g = ctx118.graph
        for e in range(0, g.m, 5):
            bid = int(g.branch_id[e])
            ov = apply_outage(g, e)
            want = dense_bprime(model118, {bid}, island_buses(model118, bid))
            assert np.max(np.abs(patch_matrix(ctx118.bprime_base, g, ov).to_dense() - want)) <= 1e-12

    def test_base_untouched(self, ctx14):
        before = ctx14.bprime_base.values.copy()
        patch_matrix(ctx14.bprime_base, ctx14.graph, apply_outage(ctx14.graph, 4))
        assert np.array_equal(ctx14.bprime_base.values, before)


class TestRedispatch:
    def test_pure_load_island(self, leaf_load):
        ctx = prepare_base(leaf_load)
        g = ctx.graph
        ov, rec = redispatch(ctx, apply_outage(g, g.edge_of_branch[4]))
        assert rec.island_net_injection == pytest.approx(-0.1)
        shares = {p.bus_id: p.share for p in rec.participants}
        assert shares == pytest.approx({1: 2 / 3, 2: 1 / 3})
        assert ov.adjusted_p_sched[g.index_map[1]] == pytest.approx(0.9333, abs=1e-4)
        assert ov.adjusted_p_sched[g.index_map[2]] == pytest.approx(0.4667, abs=1e-4)
        assert (rec.island_gen_count, rec.island_load_count) == (0, 1)

    def test_balanced_island(self):
        m = _model(
            [(1, "slack", 100, 0), (2, "pq", 0, 90), (3, "pv", 20, 20)],
            [(1, 2, 0.1), (2, 3, 0.1)],
        )
        ctx = prepare_base(m)
        ov, rec = redispatch(ctx, apply_outage(ctx.graph, 1))
        assert all(p.delta_p == 0.0 for p in rec.participants)

    def test_generation_island(self):
        m = _model(
            [(1, "slack", 100, 0), (2, "pv", 50, 0), (3, "pq", 0, 160), (4, "pv", 30, 0)],
            [(1, 2, 0.1), (2, 3, 0.1), (1, 3, 0.1), (3, 4, 0.1)],
        )
        ctx = prepare_base(m)
        g = ctx.graph
        ov, rec = redispatch(ctx, apply_outage(g, g.edge_of_branch[4]))
        assert rec.island_net_injection == pytest.approx(0.3)
        before = float(np.sum(g.p_sched))
        after = sum(ov.adjusted_p_sched.get(v, float(g.p_sched[v])) for v in range(g.n) if v not in ov.deenergized)
        assert after == pytest.approx(before, abs=1e-12)
        assert sum(p.delta_p for p in rec.participants) == pytest.approx(0.3, abs=1e-12)

    def test_threshold(self, leaf_load):
        ctx = prepare_base(leaf_load, ScreeningOptions(major_threshold=0.6))
        g = ctx.graph
        _, rec = redispatch(ctx, apply_outage(g, g.edge_of_branch[4]))
        assert [p.bus_id for p in rec.participants] == [1]


class TestScreenScenario:
    def test_non_islanding(self, ctx14):
        (d,) = enumerate_scenarios(ctx14, [3])
        res = screen_scenario(ctx14, d)
        assert res.converged and not res.islanding
        assert res.redispatch is None and res.failure_reason is None
        assert res.time_ms == round(res.time_ms, 2)

    def test_islanding_leaf(self, ctx14):
        isl = [d for d in enumerate_scenarios(ctx14) if apply_outage(ctx14.graph, d.edge).deenergized]
        assert [d.branch_id for d in isl] == [14]
        res = screen_scenario(ctx14, isl[0])
        assert res.islanding and res.converged
        assert res.deenergized_count == 1
        assert res.redispatch is not None
        lud = screen_scenario(ctx14, isl[0], replace(ctx14.options, solver="lud"))
        assert not lud.converged
        assert lud.failure_reason.startswith("SingularError")

    def test_no_participants(self):
        m = _model(
            [(1, "slack", 0, 0), (2, "pq", 0, 10), (3, "pv", 40, 20)],
            [(1, 2, 0.1), (2, 3, 0.1)],
        )
        ctx = prepare_base(m)
        (d,) = enumerate_scenarios(ctx, [2])
        res = screen_scenario(ctx, d)
        assert not res.converged
        assert res.failure_reason.startswith("NoParticipants")

    def test_not_converged_captured(self, ctx14):
        opts = replace(ctx14.options, fdpf=replace(ctx14.options.fdpf, max_outer=1, mismatch_tol=1e-12))
        (d,) = enumerate_scenarios(ctx14, [1])
        res = screen_scenario(ctx14, d, opts)
        assert not res.converged and res.failure_reason.startswith("NotConverged")


class TestScreenAll:
    def test_empty_filter(self, ctx14):
        rep = screen_all(ctx14, branches=[])
        assert rep.scenarios == () and rep.totals.tested == 0 and rep.totals.converged == 0

    def test_counts_118(self, sweep118):
        t = sweep118.totals
        assert t.tested == 186 == t.converged + t.failed
        assert t.islanding == 9

    def test_workers_agree(self, ctx14):
        a = screen_all(ctx14, worker_count=1).with_zero_times()
        b = screen_all(ctx14, worker_count=8).with_zero_times()
        assert a == b

    def test_bad_worker_count(self, ctx14):
        with pytest.raises(ValueError):
            screen_all(ctx14, worker_count=0)

    def test_lud_fails_only_on_islands(self, ctx14):
        rep = screen_all(ctx14, replace(ctx14.options, solver="lud"))
        assert rep.solver == "lud"
        assert [s.branch_id for s in rep.scenarios if not s.converged] == [14]
        assert rep.totals.lu_failures == 1

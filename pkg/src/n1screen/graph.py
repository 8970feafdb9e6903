"""Vertex/edge power-graph model.

Buses map to vertices and in-service branches to bidirectional edges. Bus
quantities live on vertices, branch admittances and the fast-decoupled
coefficient entries live on edges (off-diagonal) and vertices (diagonal).
The base graph is never mutated; an outage is a :class:`ScenarioOverlay`
and :class:`ScenarioView` turns graph + overlay into the flat arrays the
solvers sweep over.
"""

from __future__ import annotations

import json
from collections import deque
from dataclasses import asdict, dataclass, field

import numpy as np

from .ingest import BusType, NetworkModel

_TYPE_CODE = {BusType.PQ: 0, BusType.PV: 1, BusType.SLACK: 2}
PQ, PV, SLACK = 0, 1, 2


class EdgeAlreadyOut(ValueError):
    pass


@dataclass(frozen=True)
class VertexAttrs:
    bus_id: int
    bus_type: BusType
    v_mag: float
    v_ang: float
    p_sched: float
    q_sched: float
    p_gen: float
    p_load: float
    g_self: float
    b_self: float
    bprime_diag: float


@dataclass(frozen=True)
class EdgeAttrs:
    branch_id: int
    from_v: int
    to_v: int
    g_series: float
    b_series: float
    b_charging_half: float
    tap: float
    x: float
    rating: float
    in_service: bool
    bprime_off: float


def _frozen(a) -> np.ndarray:
    a = np.ascontiguousarray(a)
    a.setflags(write=False)
    return a


class PowerGraph:
    """Immutable bus-branch graph with columnar vertex and edge attributes.

    Vertex arrays (length n): ``bus_id, bus_type, v_mag, v_ang, p_sched,
    q_sched, p_gen, p_load, g_shunt, b_shunt, g_self, b_self, bprime_diag,
    bdp_diag``. Edge arrays (length m): ``branch_id, from_v, to_v, r, x,
    g_series, b_series, b_charging_half, tap, rating, in_service,
    bprime_off, bdp_off`` plus the per-end self-admittance contributions
    ``g_ff, b_ff, g_tt, b_tt`` and mutual entries ``g_ft, b_ft``.
    """

    def __init__(self, case_name: str, base_mva: float, vertex: dict, edge: dict, slack_index: int):
        self.case_name = case_name
        self.base_mva = base_mva
        for name, arr in vertex.items():
            setattr(self, name, _frozen(arr))
        for name, arr in edge.items():
            setattr(self, name, _frozen(arr))
        self._vertex_fields = tuple(vertex)
        self._edge_fields = tuple(edge)
        self.slack_index = slack_index
        self.n = len(self.bus_id)
        self.m = len(self.branch_id)
        self.index_map = {int(b): k for k, b in enumerate(self.bus_id)}
        self.edge_of_branch = {int(b): e for e, b in enumerate(self.branch_id)}
        self.adjacency = self._build_adjacency()
        # CSR-style incidence for traversal: neighbours of v are
        # adj_vertex[adj_ptr[v]:adj_ptr[v+1]] via edges adj_edge[...]
        ptr = [0]
        av, ae = [], []
        for lst in self.adjacency:
            for e, t in lst:
                ae.append(e)
                av.append(t)
            ptr.append(len(av))
        self.adj_ptr = _frozen(np.array(ptr, dtype=np.int64))
        self.adj_vertex = _frozen(np.array(av, dtype=np.int64))
        self.adj_edge = _frozen(np.array(ae, dtype=np.int64))

    def _build_adjacency(self) -> tuple[tuple[tuple[int, int], ...], ...]:
        lists: list[list[tuple[int, int]]] = [[] for _ in range(self.n)]
        for e in range(self.m):
            if not self.in_service[e]:
                continue
            f, t = int(self.from_v[e]), int(self.to_v[e])
            lists[f].append((e, t))
            lists[t].append((e, f))
        return tuple(tuple(sorted(lst, key=lambda et: (et[1], et[0]))) for lst in lists)

    def vertex(self, v: int) -> VertexAttrs:
        return VertexAttrs(
            bus_id=int(self.bus_id[v]),
            bus_type=[BusType.PQ, BusType.PV, BusType.SLACK][int(self.bus_type[v])],
            v_mag=float(self.v_mag[v]),
            v_ang=float(self.v_ang[v]),
            p_sched=float(self.p_sched[v]),
            q_sched=float(self.q_sched[v]),
            p_gen=float(self.p_gen[v]),
            p_load=float(self.p_load[v]),
            g_self=float(self.g_self[v]),
            b_self=float(self.b_self[v]),
            bprime_diag=float(self.bprime_diag[v]),
        )

    def edge(self, e: int) -> EdgeAttrs:
        return EdgeAttrs(
            branch_id=int(self.branch_id[e]),
            from_v=int(self.from_v[e]),
            to_v=int(self.to_v[e]),
            g_series=float(self.g_series[e]),
            b_series=float(self.b_series[e]),
            b_charging_half=float(self.b_charging_half[e]),
            tap=float(self.tap[e]),
            x=float(self.x[e]),
            rating=float(self.rating[e]),
            in_service=bool(self.in_service[e]),
            bprime_off=float(self.bprime_off[e]),
        )

    def structure_equal(self, other: PowerGraph) -> bool:
        if self._vertex_fields != other._vertex_fields or self._edge_fields != other._edge_fields:
            return False
        for name in self._vertex_fields + self._edge_fields:
            if not np.array_equal(getattr(self, name), getattr(other, name)):
                return False
        return self.adjacency == other.adjacency and self.slack_index == other.slack_index

    def to_json(self) -> str:
        """Vertex/edge list with attributes, for debugging dumps."""
        doc = {
            "case_name": self.case_name,
            "base_mva": self.base_mva,
            "slack_index": self.slack_index,
            "vertices": [dict(asdict(self.vertex(v)), index=v) for v in range(self.n)],
            "edges": [dict(asdict(self.edge(e)), index=e) for e in range(self.m)],
        }
        for v in doc["vertices"]:
            v["bus_type"] = v["bus_type"].value
        return json.dumps(doc, indent=1)


def build_graph(model: NetworkModel) -> PowerGraph:
    """Map buses to vertices and in-service branches to edges.

    Admittances follow the standard pi model with an off-nominal tap on the
    from side. B' entries use the XB stencil (1/x, ignoring r, charging,
    taps and shunts); B'' entries are the negated imaginary bus-admittance
    entries. Expects a model that passed :func:`validate_network`.
    """
    idx = model.bus_index()
    n = len(model.buses)
    bus_type = np.array([_TYPE_CODE[b.bus_type] for b in model.buses], dtype=np.int64)
    g_shunt = np.array([b.g_shunt for b in model.buses])
    b_shunt = np.array([b.b_shunt for b in model.buses])

    live = [br for br in model.branches if br.status]
    m = len(live)
    from_v = np.array([idx[br.from_bus] for br in live], dtype=np.int64)
    to_v = np.array([idx[br.to_bus] for br in live], dtype=np.int64)
    r = np.array([br.r for br in live], dtype=float)
    x = np.array([br.x for br in live], dtype=float)
    tap = np.array([br.tap for br in live], dtype=float)
    bch = np.array([br.b_charging for br in live], dtype=float) / 2.0
    z2 = r * r + x * x
    g_series = r / z2 if m else r
    b_series = -x / z2 if m else x
    # per-end self terms and mutual entries of the branch's 2x2 admittance block
    g_ff = g_series / tap**2
    b_ff = (b_series + bch) / tap**2
    g_tt = g_series.copy()
    b_tt = b_series + bch
    g_ft = -g_series / tap
    b_ft = -b_series / tap

    inv_x = 1.0 / x if m else x
    g_self = g_shunt.copy()
    b_self = b_shunt.copy()
    bprime_diag = np.zeros(n)
    np.add.at(g_self, from_v, g_ff)
    np.add.at(g_self, to_v, g_tt)
    np.add.at(b_self, from_v, b_ff)
    np.add.at(b_self, to_v, b_tt)
    np.add.at(bprime_diag, from_v, inv_x)
    np.add.at(bprime_diag, to_v, inv_x)

    vertex = {
        "bus_id": np.array([b.id for b in model.buses], dtype=np.int64),
        "bus_type": bus_type,
        "v_mag": np.array([b.v_mag for b in model.buses]),
        "v_ang": np.array([b.v_ang for b in model.buses]),
        "p_sched": np.array([b.p_sched for b in model.buses]),
        "q_sched": np.array([b.q_sched for b in model.buses]),
        "p_gen": np.array([b.p_gen for b in model.buses]),
        "p_load": np.array([b.p_load for b in model.buses]),
        "g_shunt": g_shunt,
        "b_shunt": b_shunt,
        "g_self": g_self,
        "b_self": b_self,
        "bprime_diag": bprime_diag,
        "bdp_diag": -b_self,
    }
    edge = {
        "branch_id": np.array([br.id for br in live], dtype=np.int64),
        "from_v": from_v,
        "to_v": to_v,
        "r": r,
        "x": x,
        "g_series": g_series,
        "b_series": b_series,
        "b_charging_half": bch,
        "tap": tap,
        "rating": np.array([br.rating_mva for br in live], dtype=float) / model.base_mva,
        "in_service": np.ones(m, dtype=bool),
        "g_ff": g_ff,
        "b_ff": b_ff,
        "g_tt": g_tt,
        "b_tt": b_tt,
        "g_ft": g_ft,
        "b_ft": b_ft,
        "bprime_off": -inv_x,
        "bdp_off": -b_ft,
    }
    slack = int(np.flatnonzero(bus_type == SLACK)[0])
    return PowerGraph(model.case_name, model.base_mva, vertex, edge, slack)


def neighbors(graph: PowerGraph, v: int) -> list[tuple[int, int]]:
    """In-service incident edges of ``v`` as (edge, neighbour), ascending neighbour."""
    if not 0 <= v < graph.n:
        raise IndexError(f"vertex {v} out of range 0..{graph.n - 1}")
    return list(graph.adjacency[v])


@dataclass(frozen=True)
class Partition:
    labels: np.ndarray  # component number per vertex
    components: tuple[frozenset, ...]  # ordered by smallest member
    main: int  # index into components of the slack's component

    @property
    def main_component(self) -> frozenset:
        return self.components[self.main]

    @property
    def islands(self) -> tuple[frozenset, ...]:
        return tuple(c for k, c in enumerate(self.components) if k != self.main)


def connected_components(graph: PowerGraph, excluded_edges=frozenset()) -> Partition:
    """Maximal connected vertex sets, ignoring excluded and out-of-service edges.

    Breadth-first with an explicit queue so long radial feeders cannot hit
    the recursion limit.
    """
    excluded = set(int(e) for e in excluded_edges)
    for e in excluded:
        if not 0 <= e < graph.m:
            raise IndexError(f"edge {e} out of range")
    labels = np.full(graph.n, -1, dtype=np.int64)
    comps = []
    ptr, adj_v, adj_e = graph.adj_ptr, graph.adj_vertex, graph.adj_edge
    for root in range(graph.n):
        if labels[root] >= 0:
            continue
        label = len(comps)
        labels[root] = label
        members = [root]
        queue = deque([root])
        while queue:
            s = queue.popleft()
            for k in range(ptr[s], ptr[s + 1]):
                t = adj_v[k]
                if labels[t] >= 0 or int(adj_e[k]) in excluded:
                    continue
                labels[t] = label
                members.append(int(t))
                queue.append(t)
        comps.append(frozenset(members))
    labels.setflags(write=False)
    return Partition(labels, tuple(comps), int(labels[graph.slack_index]))


@dataclass(frozen=True)
class ScenarioOverlay:
    outaged_edge: int
    deenergized: frozenset = frozenset()
    adjusted_p_sched: dict = field(default_factory=dict)


def apply_outage(graph: PowerGraph, edge: int) -> ScenarioOverlay:
    """Overlay for the loss of one edge; vertices cut off from the slack are deenergized."""
    if not 0 <= edge < graph.m:
        raise IndexError(f"edge {edge} out of range")
    if not graph.in_service[edge]:
        raise EdgeAlreadyOut(f"edge {edge} (branch {graph.branch_id[edge]}) is already out of service")
    part = connected_components(graph, {edge})
    dead = frozenset(v for island in part.islands for v in island)
    return ScenarioOverlay(outaged_edge=edge, deenergized=dead)


class ScenarioView:
    """Flat arrays for one scenario (or the base case when ``overlay`` is None).

    Shielded edges are the outaged edge and any edge with a deenergized
    endpoint; their self-admittance contributions are removed from the
    endpoint diagonals so every quantity below is that of the post-outage
    network.
    """

    def __init__(self, graph: PowerGraph, overlay: ScenarioOverlay | None = None, base_dead=frozenset()):
        self.graph = graph
        self.overlay = overlay
        n = graph.n
        energized = np.ones(n, dtype=bool)
        dead = set(base_dead)
        if overlay is not None:
            dead |= overlay.deenergized
        if dead:
            energized[list(dead)] = False
        self.energized = energized
        active = graph.in_service.copy()
        if overlay is not None:
            active[overlay.outaged_edge] = False
        active &= energized[graph.from_v] & energized[graph.to_v]
        self.edge_active = active

        p = graph.p_sched.copy()
        if overlay is not None:
            for v, val in overlay.adjusted_p_sched.items():
                p[v] = val
        self.p_sched = p
        self.q_sched = graph.q_sched.copy()

        off = ~active & graph.in_service
        g_self = graph.g_self.copy()
        b_self = graph.b_self.copy()
        bprime_diag = graph.bprime_diag.copy()
        if off.any():
            fv, tv = graph.from_v[off], graph.to_v[off]
            np.subtract.at(g_self, fv, graph.g_ff[off])
            np.subtract.at(g_self, tv, graph.g_tt[off])
            np.subtract.at(b_self, fv, graph.b_ff[off])
            np.subtract.at(b_self, tv, graph.b_tt[off])
            inv_x = 1.0 / graph.x[off]
            np.subtract.at(bprime_diag, fv, inv_x)
            np.subtract.at(bprime_diag, tv, inv_x)
        self.g_self = g_self
        self.b_self = b_self
        self.bprime_diag = bprime_diag
        self.bdp_diag = -b_self

        slack = np.zeros(n, dtype=bool)
        slack[graph.slack_index] = True
        # rows carried as identity in B' and B''
        self.fixed_p = slack | ~energized
        self.fixed_q = self.fixed_p | (graph.bus_type == PV)

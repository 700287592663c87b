"""Offset flow networks and an exact convex min-cost flow solver.

A coverage graph (a local DAG or the APAG) becomes a network whose flows are
*corrections*: for every node and every edge there is a decrease arc, running
against the coverage direction and capped by the coverage, and an uncapped
increase arc along it. Exogenous imbalance is fed through an artificial
source S* and sink T*. Minimising the quadratic correction cost yields the
closest conserving coverage assignment.
"""

from __future__ import annotations

import logging
from collections import deque
from dataclasses import dataclass, field

logger = logging.getLogger(__name__)

ZERO, QUAD, QUAD_C = "zero", "quad", "quad_c"


@dataclass(frozen=True)
class Arc:
    tail: str
    head: str
    cap: int
    cost: str = ZERO
    center: int = 0
    tag: tuple = ()

    def value(self, x: int) -> int:
        if self.cost == ZERO:
            return 0
        if self.cost == QUAD:
            return x * x
        return (x - self.center) ** 2

    def argmin(self) -> int:
        if self.cost == QUAD_C:
            return min(max(self.center, 0), self.cap)
        return 0


@dataclass
class OffsetFlowNetwork:
    nodes: list[str]
    arcs: list[Arc]
    q: dict[str, int]
    # required net offset inflow per split node, before balance arcs
    imbalance: dict[str, int] = field(default_factory=dict)

    def arc_index(self) -> dict[tuple, int]:
        return {a.tag: i for i, a in enumerate(self.arcs) if a.tag}


@dataclass
class FlowAssignment:
    flows: list[int]
    objective: int

    def __getitem__(self, i: int) -> int:
        return self.flows[i]


class InfeasibleFlow(RuntimeError):
    pass


def _name(side: str, v) -> str:
    return f"{v}_{side}"


def build_offset_network(graph, inf_cap: int | None = None) -> OffsetFlowNetwork:
    """Offset network of any coverage graph exposing ``edges``, ``node_cov``,
    ``active_nodes``, ``sources`` and ``sinks``.

    Node v is split into v_in and v_out. Per node: (v_out, v_in) capped at
    cov(v) and (v_in, v_out) uncapped. Per edge (u, v): (v_in, u_out) capped at
    cov(u, v) and (u_out, v_in) uncapped. All four carry x² costs. Free arcs
    S→s_in, t_out→T and T→S close the circulation: source s demands cov(s)
    at s_in and sink t supplies cov(t) at t_out. S*/T* balance arcs carry the
    imbalance of every other split node, so a balanced graph has none.
    "Uncapped" means capped at the total coverage.
    """
    nodes_v = graph.active_nodes()
    edges = dict(sorted(graph.edges.items()))
    ncov = {v: int(graph.node_cov(v)) for v in nodes_v}
    if inf_cap is None:
        inf_cap = max(1, sum(edges.values()) + sum(ncov.values()))
    names = []
    for v in nodes_v:
        names += [_name("in", v), _name("out", v)]
    names += ["S", "T", "S*", "T*"]

    arcs: list[Arc] = []
    for v in nodes_v:
        arcs.append(Arc(_name("out", v), _name("in", v), ncov[v], QUAD, 0, ("node_dec", v)))
        arcs.append(Arc(_name("in", v), _name("out", v), inf_cap, QUAD, 0, ("node_inc", v)))
    for (u, v), c in edges.items():
        arcs.append(Arc(_name("in", v), _name("out", u), int(c), QUAD, 0, ("edge_dec", (u, v))))
        arcs.append(Arc(_name("out", u), _name("in", v), inf_cap, QUAD, 0, ("edge_inc", (u, v))))
    sources, sinks = graph.sources(), graph.sinks()
    for s in sources:
        arcs.append(Arc("S", _name("in", s), inf_cap, ZERO, 0, ("source", s)))
    for t in sinks:
        arcs.append(Arc(_name("out", t), "T", inf_cap, ZERO, 0, ("sink", t)))

    # required net inflow of offsets = baseline outflow - baseline inflow
    need: dict[str, int] = {}
    out_sum = {v: 0 for v in nodes_v}
    in_sum = {v: 0 for v in nodes_v}
    for (u, v), c in edges.items():
        out_sum[u] += c
        in_sum[v] += c
    for v in nodes_v:
        need[_name("in", v)] = ncov[v] - in_sum[v]
        need[_name("out", v)] = out_sum[v] - ncov[v]
    # a source's inflow and a sink's outflow are carried by the free S/T arcs
    # as supplies, so only nodes whose own coverages disagree need S*/T*
    q = {n: 0 for n in names}
    ends = {_name("in", s) for s in sources} | {_name("out", t) for t in sinks}
    arcs.append(Arc("T", "S", inf_cap, ZERO, 0, ("close",)))
    for n in names[:-4]:
        d = need[n]
        if n in ends:
            q[n] = -d
        elif d > 0:
            arcs.append(Arc(n, "T*", d, ZERO, 0, ("balance", n)))
            q["T*"] -= d
        elif d < 0:
            arcs.append(Arc("S*", n, -d, ZERO, 0, ("balance", n)))
            q["S*"] -= d
    return OffsetFlowNetwork(names, arcs, q, need)


def solve_min_cost_flow(net: OffsetFlowNetwork) -> FlowAssignment:
    """Exact integral min-cost flow for separable convex arc costs.

    Every arc starts at the minimiser of its own cost, so the residual graph
    has no negative cycle. The remaining node excesses are then cleared by
    successive shortest paths (SPFA on marginal costs). A path made only of
    zero-cost arcs is augmented in bulk; otherwise one unit at a time, which
    keeps the piecewise-linear expansion of the convex costs exact.
    """
    idx = {n: i for i, n in enumerate(net.nodes)}
    N = len(net.nodes)
    arcs = net.arcs
    x = [a.argmin() for a in arcs]
    excess = [0] * N
    for n, qv in net.q.items():
        excess[idx[n]] += qv
    for i, a in enumerate(arcs):
        excess[idx[a.tail]] -= x[i]
        excess[idx[a.head]] += x[i]
    out_arcs: list[list[int]] = [[] for _ in range(N)]
    in_arcs: list[list[int]] = [[] for _ in range(N)]
    for i, a in enumerate(arcs):
        out_arcs[idx[a.tail]].append(i)
        in_arcs[idx[a.head]].append(i)
    tails = [idx[a.tail] for a in arcs]
    heads = [idx[a.head] for a in arcs]

    def fwd_cost(i):
        a = arcs[i]
        return a.value(x[i] + 1) - a.value(x[i])

    def bwd_cost(i):
        a = arcs[i]
        return a.value(x[i] - 1) - a.value(x[i])

    while True:
        srcs = [v for v in range(N) if excess[v] > 0]
        if not srcs:
            break
        # SPFA from all excess nodes at once
        dist = [None] * N
        prev = [None] * N
        inq = [False] * N
        dq = deque()
        for v in srcs:
            dist[v] = 0
            dq.append(v)
            inq[v] = True
        while dq:
            v = dq.popleft()
            inq[v] = False
            dv = dist[v]
            for i in out_arcs[v]:
                if x[i] < arcs[i].cap:
                    w = heads[i]
                    nd = dv + fwd_cost(i)
                    if dist[w] is None or nd < dist[w]:
                        dist[w], prev[w] = nd, (i, 1)
                        if not inq[w]:
                            dq.append(w)
                            inq[w] = True
            for i in in_arcs[v]:
                if x[i] > 0:
                    w = tails[i]
                    nd = dv + bwd_cost(i)
                    if dist[w] is None or nd < dist[w]:
                        dist[w], prev[w] = nd, (i, -1)
                        if not inq[w]:
                            dq.append(w)
                            inq[w] = True
        sinks = [v for v in range(N) if excess[v] < 0 and dist[v] is not None]
        if not sinks:
            raise InfeasibleFlow("no augmenting path clears the remaining excess")
        t = min(sinks, key=lambda v: (dist[v], v))
        path = []
        v = t
        while prev[v] is not None:
            i, d = prev[v]
            path.append((i, d))
            v = tails[i] if d == 1 else heads[i]
        s = v
        amount = min(excess[s], -excess[t])
        linear = all(arcs[i].cost == ZERO for i, _ in path)
        for i, d in path:
            room = arcs[i].cap - x[i] if d == 1 else x[i]
            amount = min(amount, room)
        if not linear:
            amount = min(amount, 1)
        for i, d in path:
            x[i] += d * amount
        excess[s] -= amount
        excess[t] += amount
        if amount == 0:
            raise InfeasibleFlow("zero-capacity augmenting path")
    obj = sum(a.value(x[i]) for i, a in enumerate(arcs))
    return FlowAssignment(x, obj)


def apply_flow_correction(graph, net: OffsetFlowNetwork, flow: FlowAssignment) -> dict:
    """Corrected edge coverages cov' = cov - x(decrease) + x(increase)."""
    where = net.arc_index()
    out = {}
    for e, c in sorted(graph.edges.items()):
        new = c - flow[where[("edge_dec", e)]] + flow[where[("edge_inc", e)]]
        if new < 0:
            raise ArithmeticError(f"negative corrected coverage on {e}")
        out[e] = new
    return out


def correct_dag(dag):
    """Build, solve and apply the offset network of a local DAG."""
    if not dag.edges:
        return dag, FlowAssignment([], 0)
    net = build_offset_network(dag)
    flow = solve_min_cost_flow(net)
    return dag.with_edges(apply_flow_correction(dag, net, flow)), flow


def write_network(net: OffsetFlowNetwork, path, flow: FlowAssignment | None = None) -> None:
    with open(path, "w") as fh:
        for n in net.nodes:
            fh.write(f"node\t{n}\tq={net.q.get(n, 0)}\n")
        for i, a in enumerate(net.arcs):
            extra = f"\tflow={flow[i]}" if flow is not None else ""
            fh.write(f"arc\t{a.tail}\t{a.head}\tcap={a.cap}\tcost={a.cost}{extra}\n")

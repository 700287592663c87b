"""Per-edge local DAGs and their coverage estimation.

For an AG edge (U_i, U_j) the local DAG spans the anchors and their paired
unitigs. Edge coverages are estimated by walking the AG from the anchor edge
while carrying a bag of coverages that entered the walk from other
haplotypes; at every fork the bag is matched against the outgoing coverages.
"""

from __future__ import annotations

import heapq
import logging
import math
from dataclasses import dataclass, field

from .dbg import AssemblyGraph
from .pairing import PairedInfo

logger = logging.getLogger(__name__)

EXACT_LIMIT = 12
MAX_TRAVERSAL_STEPS = 50_000


@dataclass
class LocalDag:
    anchor: tuple[int, int]
    nodes: tuple[int, ...]
    edges: dict[tuple[int, int], int]
    anchor_cov: int = 0

    def successors(self, u: int) -> list[int]:
        return sorted(v for (a, v) in self.edges if a == u)

    def predecessors(self, v: int) -> list[int]:
        return sorted(a for (a, b) in self.edges if b == v)

    def in_cov(self, v: int) -> int:
        return sum(c for (a, b), c in self.edges.items() if b == v)

    def out_cov(self, v: int) -> int:
        return sum(c for (a, b), c in self.edges.items() if a == v)

    def node_cov(self, v: int) -> int:
        """Coverage of a node: incoming sum, or outgoing sum for sources."""
        if any(b == v for (_, b) in self.edges):
            return self.in_cov(v)
        return self.out_cov(v)

    def active_nodes(self) -> list[int]:
        return sorted({u for e in self.edges for u in e})

    def sources(self) -> list[int]:
        heads = {b for (_, b) in self.edges}
        return [u for u in self.active_nodes() if u not in heads]

    def sinks(self) -> list[int]:
        tails = {a for (a, _) in self.edges}
        return [u for u in self.active_nodes() if u not in tails]

    def topological_order(self) -> list[int]:
        nodes = self.active_nodes()
        indeg = {u: 0 for u in nodes}
        for (_, b) in self.edges:
            indeg[b] += 1
        ready = [u for u in nodes if indeg[u] == 0]
        heapq.heapify(ready)
        order = []
        while ready:
            u = heapq.heappop(ready)
            order.append(u)
            for v in self.successors(u):
                indeg[v] -= 1
                if indeg[v] == 0:
                    heapq.heappush(ready, v)
        if len(order) != len(nodes):
            raise ValueError("local DAG contains a cycle")
        return order

    def with_edges(self, edges: dict[tuple[int, int], int]) -> "LocalDag":
        return LocalDag(self.anchor, self.nodes, dict(edges), self.anchor_cov)


# --- assignment of incoming to outgoing coverages ----------------------------

@dataclass
class Assignment:
    """Result of the iterative incoming/outgoing coverage matching.

    ``amounts[v][u]`` is the part of incoming ``v`` consumed by outgoing ``u``
    over all rounds; ``first`` is the round-one choice and ``cost`` its
    objective value.
    """

    first: list[int]
    cost: int
    amounts: list[list[int]]
    residual_in: list[int]
    residual_out: list[int]
    rounds: int = 1

    def assigned_to(self, u: int) -> list[int]:
        return [v for v, row in enumerate(self.amounts) if row[u] > 0]


def _solve_round(ic: list[int], oc: list[int], allowed=None) -> tuple[int, list[int]]:
    """Minimise sum_u |oc_u - sum of ic assigned to u|, each ic to one u.

    Equal costs are settled by leaving the fewest non-zero outgoing
    coverages without any incoming. ``allowed[v]``, when given, lists the
    outgoing indices incoming v may take.
    """
    n, b = len(ic), len(oc)
    order_in = sorted(range(n), key=lambda v: (-ic[v], v))
    order_out = sorted(range(b), key=lambda u: (-oc[u], u))
    opts = [order_out if allowed is None or allowed[v] is None
            else [u for u in order_out if u in allowed[v]] for v in range(n)]
    if n > EXACT_LIMIT:
        res = list(oc)
        choice = [0] * n
        for v in order_in:
            u = min(opts[v], key=lambda w: abs(res[w] - ic[v]))
            choice[v] = u
            res[u] -= ic[v]
        return sum(abs(r) for r in res), choice

    suffix = [0] * (n + 1)
    for pos in range(n - 1, -1, -1):
        suffix[pos] = suffix[pos + 1] + ic[order_in[pos]]
    total_out = sum(oc)
    load = [0] * b
    choice = [0] * n
    best = [math.inf, None, math.inf]

    def bound(pos):
        over = sum(max(load[u] - oc[u], 0) for u in range(b))
        return max(over, abs(total_out - sum(load) - suffix[pos]))

    def rec(pos):
        if pos == n:
            cost = sum(abs(oc[u] - load[u]) for u in range(b))
            unfed = sum(1 for u in range(b) if oc[u] > 0 and load[u] == 0)
            if (cost, unfed) < (best[0], best[2]):
                best[0], best[1], best[2] = cost, list(choice), unfed
            return
        v = order_in[pos]
        for u in opts[v]:
            load[u] += ic[v]
            choice[v] = u
            lb = bound(pos + 1)
            if lb < best[0] or (lb == best[0] and best[2] > 0):
                rec(pos + 1)
            load[u] -= ic[v]
            if best[0] == 0:
                return

    rec(0)
    return int(best[0]), best[1]


def assign_coverages(iC, oC, allowed=None) -> Assignment:
    """Iteratively assign incoming coverages to outgoing ones.

    Each round solves the whole-item matching on what is left. An outgoing
    coverage receiving more than it holds is consumed largest-incoming first
    and drops to zero; unconsumed incoming remainders enter the next round.
    Stops when every incoming is spent or every outgoing is exhausted.
    ``allowed`` optionally restricts, per incoming, the outgoing indices it
    may be matched with (None for no restriction).
    """
    ic = [int(x) for x in iC]
    oc = [int(x) for x in oC]
    if not ic or not oc:
        raise ValueError("need at least one incoming and one outgoing coverage")
    if min(ic) < 0 or min(oc) < 0:
        raise ValueError("coverages must be non-negative")
    n, b = len(ic), len(oc)
    amounts = [[0] * b for _ in range(n)]
    first, cost, rounds = None, None, 0
    while True:
        act_out = [u for u in range(b) if oc[u] > 0]
        act_in = [v for v in range(n) if ic[v] > 0 and (
            allowed is None or allowed[v] is None or any(u in allowed[v] for u in act_out))]
        if not act_in or not act_out:
            break
        sub = None
        if allowed is not None:
            pos = {u: i for i, u in enumerate(act_out)}
            sub = [None if allowed[v] is None else {pos[u] for u in allowed[v] if u in pos}
                   for v in act_in]
        c, ch = _solve_round([ic[v] for v in act_in], [oc[u] for u in act_out], sub)
        choice = {v: act_out[ch[i]] for i, v in enumerate(act_in)}
        if first is None:
            cost = c
            first = [choice.get(v, -1) for v in range(n)]
        rounds += 1
        for u in act_out:
            takers = sorted((v for v in act_in if choice[v] == u), key=lambda v: (-ic[v], v))
            room = oc[u]
            for v in takers:
                take = min(ic[v], room)
                amounts[v][u] += take
                ic[v] -= take
                room -= take
            oc[u] = room
    if first is None:
        first, cost = [-1] * n, sum(oC)
    return Assignment(first, int(cost), amounts, ic, oc, rounds)


# --- DAG construction ---------------------------------------------------------

def _step_len(ag: AssemblyGraph, u: int) -> int:
    return len(ag.unitigs[u]) - ag.k + 1


def dag_node_set(info: PairedInfo, anchor: tuple[int, int]) -> tuple[int, ...]:
    ui, uj = anchor
    return tuple(sorted({ui, uj} | info.P(ui) | info.P(uj)))


def _candidate_edges(ag: AssemblyGraph, V: set[int], max_dist: int, branch_limit: int):
    """(dist, u, v) for V nodes v reachable from u through non-V unitigs only."""
    found = []
    for u in sorted(V):
        if u not in ag.unitigs:
            continue
        best: dict[int, int] = {}
        heap = [(0, s) for s in ag.successors(u)]
        heapq.heapify(heap)
        done = set()
        while heap:
            d, x = heapq.heappop(heap)
            if x in done:
                continue
            done.add(x)
            if x in V:
                if x != u and x not in best:
                    best[x] = d
                continue
            nd = d + _step_len(ag, x)
            if nd >= max_dist:
                continue
            for y in ag.successors(x):
                if y not in done:
                    heapq.heappush(heap, (nd, y))
            if len(heap) > branch_limit:
                heap = heapq.nsmallest(branch_limit, heap)
                heapq.heapify(heap)
        found.extend((d, u, v) for v, d in best.items())
    return sorted(found)


def _reaches(adj: dict[int, set[int]], src: int, dst: int) -> bool:
    stack, seen = [src], {src}
    while stack:
        x = stack.pop()
        if x == dst:
            return True
        for y in adj.get(x, ()):
            if y not in seen:
                seen.add(y)
                stack.append(y)
    return False


def build_local_dag(ag: AssemblyGraph, info: PairedInfo, edge: tuple[int, int],
                    max_dist: int, branch_limit: int = 10, estimate: bool = True,
                    min_frac: float = 0.1, drop_zero: bool = True) -> LocalDag:
    """Local DAG of the anchor ``edge`` over {U_i, U_j} ∪ P(U_i) ∪ P(U_j).

    u→v is an edge when v is reachable from u through unitigs outside the node
    set with fewer than ``max_dist`` bp in between. The frontier of each search
    is capped at ``branch_limit`` open branches. Candidates are added shortest
    first and any edge that would close a cycle is discarded. With
    ``estimate`` the edge coverages come from the bag traversal; edges that
    end up with zero coverage are dropped unless ``drop_zero`` is False.
    """
    if edge not in ag.edges:
        raise ValueError(f"{edge} is not an assembly-graph edge")
    nodes = dag_node_set(info, edge)
    V = set(nodes)
    adj: dict[int, set[int]] = {edge[0]: {edge[1]}}
    edges = {edge: 0}
    for _, u, v in _candidate_edges(ag, V, max_dist, branch_limit):
        if (u, v) in edges or _reaches(adj, v, u):
            continue
        adj.setdefault(u, set()).add(v)
        edges[(u, v)] = 0
    dag = LocalDag(edge, nodes, edges, ag.support(*edge))
    if not estimate:
        return dag
    cov = estimate_dag_coverages(ag, info, dag, max_dist, min_frac)
    return dag.with_edges({e: c for e, c in sorted(cov.items()) if c > 0 or not drop_zero})


# --- coverage traversal -------------------------------------------------------

@dataclass
class TraversalState:
    node: int
    path: tuple[int, ...]
    cov: int
    bag: tuple[int, ...]
    last_v: int
    dist: int = 0
    paired: frozenset = field(default_factory=frozenset)


def estimate_dag_coverages(ag: AssemblyGraph, info: PairedInfo, dag: LocalDag,
                           max_dist: int, min_frac: float = 0.1) -> dict[tuple[int, int], int]:
    """Coverage of every DAG edge from one sweep of anchor traversals.

    A traversal reaching DAG node e right after DAG node s adds its coverage to
    cov(s, e). Traversals stop when their coverage falls below ``min_frac``
    times the anchor coverage, when ``max_dist`` bp pass without meeting a DAG
    node, or at dead ends. At a fork each branch is scored by how many walked
    nodes list it in their paired set; the path coverage is steered to the
    best-scored branches unless the coverages clearly disagree.
    """
    ui, uj = dag.anchor
    V = set(dag.nodes)
    cov = {e: 0 for e in dag.edges}
    start = ag.support(ui, uj)
    cov[(ui, uj)] = start
    floor = max(1, min_frac * start)
    bag = tuple(sorted((ag.support(p, uj) for p in ag.predecessors(uj) if p != ui), reverse=True))
    paired = info.P(ui) | info.P(uj)
    stack = [TraversalState(uj, (ui, uj), start, bag, uj, 0, paired)]
    steps = 0
    while stack and steps < MAX_TRAVERSAL_STEPS:
        st = stack.pop()
        steps += 1
        succ = [s for s in ag.successors(st.node) if s not in st.path]
        if not succ:
            continue
        if len(ag.successors(st.node)) > 1:
            outs = ag.successors(st.node)
            votes = [sum(1 for x in st.path if s in info.P(x)) for s in outs]
            best = {s for s, n in zip(outs, votes) if n == max(votes) and n > 0}
            branches, restricted = _split_at_fork(ag, st, best or None)
            if restricted:
                branches = [b for b in branches if b[0] in best]
        else:
            s = succ[0]
            branches = [(s, min(st.cov, ag.support(st.node, s)), st.bag)]
        nxt = []
        for s, c, b in branches:
            if c < floor:
                continue
            joins = tuple(ag.support(p, s) for p in ag.predecessors(s) if p != st.node)
            newbag = tuple(sorted(b + joins, reverse=True))
            if s in V:
                if (st.last_v, s) in cov:
                    cov[(st.last_v, s)] += c
                last, dist = s, 0
            else:
                last, dist = st.last_v, st.dist + _step_len(ag, s)
                if dist >= max_dist:
                    continue
            nxt.append(TraversalState(s, st.path + (s,), c, newbag, last, dist,
                                      st.paired | info.P(s)))
        stack.extend(reversed(nxt))
    if stack:
        logger.warning("anchor %s: traversal step cap reached", dag.anchor)
    return cov


def _split_at_fork(ag: AssemblyGraph, st: TraversalState, pointed=None, slack: float = 0.1):
    """Distribute bag and path coverage over the out-edges of ``st.node``.

    With ``pointed`` given, the path's own coverage is first restricted to
    those successors; the restriction is kept unless it raises the matching
    cost by more than ``slack`` times the incoming total, in which case the
    coverages overrule the paired evidence. Returns (branches, restricted).
    """
    outs = list(ag.successors(st.node))
    oc = [ag.support(st.node, s) for s in outs]
    iC = list(st.bag) + [st.cov]
    nbag = len(st.bag)
    res = assign_coverages(iC, oc)
    restricted = False
    if pointed:
        allowed = [None] * nbag + [{u for u, s in enumerate(outs) if s in pointed}]
        alt = assign_coverages(iC, oc, allowed)
        if alt.cost <= res.cost + slack * sum(iC):
            res, restricted = alt, True
    out = []
    for u, s in enumerate(outs):
        if s in st.path:
            continue
        portions = tuple(res.amounts[v][u] for v in range(nbag) if res.amounts[v][u] > 0)
        c = min(max(oc[u] - sum(portions), 0), res.amounts[nbag][u])
        out.append((s, c, portions))
    return out, restricted


def estimate_edge_coverage(ag: AssemblyGraph, info: PairedInfo, anchor: tuple[int, int],
                           s: int, e: int, max_dist: int, min_frac: float = 0.1) -> int:
    """Estimated coverage of DAG edge (s, e) in the anchor's local DAG (0 if absent)."""
    dag = build_local_dag(ag, info, anchor, max_dist, estimate=False)
    if (s, e) not in dag.edges:
        return 0
    return estimate_dag_coverages(ag, info, dag, max_dist, min_frac)[(s, e)]


# --- readjustment -------------------------------------------------------------

def _largest_remainder(total: int, weights: list[float]) -> list[int]:
    wsum = sum(weights)
    if wsum <= 0:
        weights = [1.0] * len(weights)
        wsum = float(len(weights))
    raw = [total * w / wsum for w in weights]
    base = [math.floor(r) for r in raw]
    left = total - sum(base)
    order = sorted(range(len(raw)), key=lambda i: (-(raw[i] - base[i]), i))
    for i in order[:left]:
        base[i] += 1
    return base


def out_of_coverage(cin: int, cout: int, ratio_tol: float) -> bool:
    return max(cin, cout) > (1 + ratio_tol) * min(cin, cout)


def redistribute(total_in: int, out_covs: list[int], anchor_cov: int) -> list[int]:
    """Split ``total_in`` over out-edges, favouring coverages near the anchor's.

    Weight of branch l is |diff_l - sum(diff)| with diff_l = |cov_l - anchor|;
    integer shares by largest remainder keep the sum exact.
    """
    diff = [abs(c - anchor_cov) for c in out_covs]
    tot = sum(diff)
    weights = [abs(d - tot) for d in diff]
    return _largest_remainder(int(total_in), weights)


def readjust_coverages(dag: LocalDag, ratio_tol: float = 0.1) -> LocalDag:
    """Rebalance out-of-coverage nodes in topological order."""
    edges = dict(dag.edges)
    if not edges:
        return dag.with_edges(edges)
    work = dag.with_edges(edges)
    for r in work.topological_order():
        ins = [p for p in work.predecessors(r)]
        outs = [s for s in work.successors(r)]
        if not ins or not outs:
            continue
        cin = sum(edges[(p, r)] for p in ins)
        cout = sum(edges[(r, s)] for s in outs)
        if not out_of_coverage(cin, cout, ratio_tol):
            continue
        if len(outs) == 1:
            edges[(r, outs[0])] = cin
        elif len(ins) == 1:
            new = redistribute(cin, [edges[(r, s)] for s in outs], dag.anchor_cov)
            for s, c in zip(outs, new):
                edges[(r, s)] = c
        else:
            ic = [edges[(p, r)] for p in ins]
            oc = [edges[(r, s)] for s in outs]
            if sum(oc) == 0:
                new = _largest_remainder(cin, [1.0] * len(outs))
            else:
                res = assign_coverages(ic, oc)
                new = [0] * len(outs)
                for v, u in enumerate(res.first):
                    if u >= 0:
                        new[u] += ic[v]
            for s, c in zip(outs, new):
                edges[(r, s)] = c
    return dag.with_edges(edges)


# --- diagnostics --------------------------------------------------------------

def err_objective(dag: LocalDag, paths) -> int:
    """Squared residual between coverages and the summed path weights."""
    node_flow: dict[int, int] = {}
    edge_flow: dict[tuple[int, int], int] = {}
    for path, w in paths:
        for u in path:
            node_flow[u] = node_flow.get(u, 0) + w
        for e in zip(path[:-1], path[1:]):
            edge_flow[e] = edge_flow.get(e, 0) + w
    total = 0
    for u in dag.active_nodes():
        total += (dag.node_cov(u) - node_flow.get(u, 0)) ** 2
    for e, c in dag.edges.items():
        total += (c - edge_flow.get(e, 0)) ** 2
    return total


def write_dot(dag: LocalDag, path) -> None:
    with open(path, "w") as fh:
        fh.write(f'digraph "DAG_{dag.anchor[0]}_{dag.anchor[1]}" {{\n')
        for u in dag.nodes:
            style = ', style=bold' if u in dag.anchor else ''
            fh.write(f'  U{u} [label="U{u}\\n{dag.node_cov(u)}"{style}];\n')
        for (a, b), c in sorted(dag.edges.items()):
            fh.write(f'  U{a} -> U{b} [label="{c}"];\n')
        fh.write("}\n")

"""Weighted path decomposition of corrected local DAGs and APAG assembly."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

from .dagcov import LocalDag
from .dbg import AssemblyGraph
from .pairing import PairedInfo

logger = logging.getLogger(__name__)


@dataclass
class WeightedPathSet:
    paths: list[tuple[int, ...]] = field(default_factory=list)
    weights: list[int] = field(default_factory=list)
    anchor: tuple[int, int] | None = None

    def __iter__(self):
        return iter(zip(self.paths, self.weights))

    def __len__(self) -> int:
        return len(self.paths)

    def add(self, path, weight) -> None:
        self.paths.append(tuple(path))
        self.weights.append(weight)

    def edge_sums(self) -> dict[tuple[int, int], int]:
        out: dict[tuple[int, int], int] = {}
        for p, w in self:
            for e in zip(p[:-1], p[1:]):
                out[e] = out.get(e, 0) + w
        return out


def decompose_flow_paths(dag: LocalDag, info: PairedInfo | None = None) -> WeightedPathSet:
    """Peel source-to-sink paths off a conserving DAG until no flow is left.

    Forks are resolved with the haplotype reference node, the parent of the
    last node of indegree > 1 met on the path (the path's first node before
    any join): branches inside its paired set are preferred, the heaviest of
    them is taken, and without any pointed branch the heaviest overall. Ties go
    to the lower node id. Each path weighs its minimum residual flow.
    """
    res = {e: c for e, c in sorted(dag.edges.items()) if c > 0}
    indeg: dict[int, int] = {}
    for (_, b) in dag.edges:
        indeg[b] = indeg.get(b, 0) + 1
    out = WeightedPathSet(anchor=dag.anchor)

    def outs(u):
        return [(v, c) for (a, v), c in res.items() if a == u and c > 0]

    while res:
        heads = {b for (_, b) in res}
        starts = [(c, e) for e, c in res.items() if e[0] not in heads]
        if not starts:
            logger.warning("anchor %s: residual flow without a source", dag.anchor)
            break
        _, first = max(starts, key=lambda t: (t[0], [-x for x in t[1]]))
        path = [first[0], first[1]]
        ref = first[0]
        while True:
            cand = outs(path[-1])
            cand = [(v, c) for v, c in cand if v not in path]
            if not cand:
                break
            if len(cand) > 1 and info is not None:
                pointed = [(v, c) for v, c in cand if ref in info.paired_with(v)]
                if pointed:
                    cand = pointed
            v, _ = max(cand, key=lambda t: (t[1], -t[0]))
            if indeg.get(v, 0) > 1:
                ref = path[-1]
            path.append(v)
        w = min(res[e] for e in zip(path[:-1], path[1:]))
        for e in zip(path[:-1], path[1:]):
            res[e] -= w
            if res[e] == 0:
                del res[e]
        out.add(path, w)
    return out


def copath_support(path, anchor, info: PairedInfo, active) -> int:
    """Weakest anchor's count of paired links into ``path`` beyond the anchor.

    Only anchors whose paired set reaches the DAG take part; with none, or
    when the path is the anchor edge alone (no branch was chosen), the
    support is unbounded.
    """
    counts = []
    rest = set(path) - set(anchor)
    if not rest:
        return 1 << 30
    for a in anchor:
        P = info.P(a) & active
        if P:
            counts.append(len(P & rest))
    return min(counts) if counts else 1 << 30


def polish_local_paths(paths: WeightedPathSet, anchor: tuple[int, int], t_solid: int,
                       info: PairedInfo | None = None, min_copath_support: int = 1,
                       dag: LocalDag | None = None) -> WeightedPathSet:
    """Drop paths missing an anchor, lighter than ``t_solid`` or lacking joint
    paired support from both anchors."""
    ui, uj = anchor
    active = set(dag.active_nodes()) if dag is not None else {u for p in paths.paths for u in p}
    out = WeightedPathSet(anchor=anchor)
    for p, w in paths:
        if ui not in p or uj not in p:
            continue
        if w < t_solid:
            continue
        if info is not None and min_copath_support > 0:
            if copath_support(p, anchor, info, active) < min_copath_support:
                continue
        out.add(p, w)
    return out


# --- APAG ----------------------------------------------------------------------

@dataclass(frozen=True)
class ApagNode:
    unitig: int
    pset: frozenset


@dataclass
class Apag:
    k: int
    nodes: dict[int, ApagNode]
    edges: dict[tuple[int, int], int]
    seqs: dict[int, str]
    abundance: dict[int, float]

    def seq(self, n: int) -> str:
        return self.seqs[self.nodes[n].unitig]

    def length(self, n: int) -> int:
        return len(self.seq(n))

    def successors(self, u: int) -> list[int]:
        return sorted(b for (a, b) in self.edges if a == u)

    def predecessors(self, v: int) -> list[int]:
        return sorted(a for (a, b) in self.edges if b == v)

    def active_nodes(self) -> list[int]:
        return sorted({u for e in self.edges for u in e})

    def sources(self) -> list[int]:
        heads = {b for (_, b) in self.edges}
        return [u for u in self.active_nodes() if u not in heads]

    def sinks(self) -> list[int]:
        tails = {a for (a, _) in self.edges}
        return [u for u in self.active_nodes() if u not in tails]

    def isolated(self) -> list[int]:
        act = set(self.active_nodes())
        return [n for n in sorted(self.nodes) if n not in act]

    def node_cov(self, v: int) -> int:
        ins = [c for (a, b), c in self.edges.items() if b == v]
        if ins:
            return sum(ins)
        outs = [c for (a, b), c in self.edges.items() if a == v]
        if outs:
            return sum(outs)
        return int(round(self.abundance[self.nodes[v].unitig]))

    def unitig_ids(self) -> set[int]:
        return {n.unitig for n in self.nodes.values()}


def _unify(keys: set[tuple[int, frozenset]], raw_edges=None) -> dict:
    """Map each (unitig, pset) key to its representative key.

    Paired sets are first restricted to unitigs present in the APAG; then an
    instance whose set is strictly contained in exactly one other instance of
    the same unitig is merged into it, largest sets first. A subset instance
    with several supersets is merged into the one that completes it: the only
    superset that has edges on the side where the subset has none, and none
    on the side where the subset has some.
    """
    present = {u for u, _ in keys}
    rep = {key: (key[0], frozenset(key[1] & present)) for key in keys}
    by_unitig: dict[int, set[frozenset]] = {}
    for u, s in rep.values():
        by_unitig.setdefault(u, set()).add(s)
    merge: dict[tuple[int, frozenset], tuple[int, frozenset]] = {}
    for u, sets in by_unitig.items():
        ordered = sorted(sets, key=lambda s: (-len(s), sorted(s)))
        target: dict[frozenset, frozenset] = {}
        for s in ordered:
            supers = {target[t] for t in ordered if s < t}
            target[s] = supers.pop() if len(supers) == 1 else s
            merge[(u, s)] = (u, target[s])
    out = {key: merge[rep[key]] for key in keys}
    if raw_edges:
        out = _complete_dead_ends(out, raw_edges)
    return out


def _complete_dead_ends(rep: dict, raw_edges) -> dict:
    has_in, has_out = set(), set()
    for a, b in raw_edges:
        has_out.add(rep[a])
        has_in.add(rep[b])
    instances: dict[int, set[frozenset]] = {}
    for u, s in rep.values():
        instances.setdefault(u, set()).add(s)
    moved = {}
    for u, sets in sorted(instances.items()):
        for s in sorted(sets, key=lambda x: (len(x), sorted(x))):
            key = (u, s)
            side_in, side_out = key in has_in, key in has_out
            if side_in == side_out:
                continue
            fits = [t for t in sets if s < t
                    and ((u, t) in has_in) == side_out and ((u, t) in has_out) == side_in]
            if len(fits) == 1:
                moved[key] = (u, fits[0])
    if moved:
        logger.debug("joined %d dead-end instances", len(moved))
    return {k: moved.get(r, r) for k, r in rep.items()}


def build_apag(ag: AssemblyGraph, all_paths, info: PairedInfo,
               min_isolated_len: int = 500) -> Apag:
    """Split AG unitigs into haplotype instances keyed by (unitig, P(U) ∩ p).

    For every polished path of anchor (U_i, U_j) the two anchor instances are
    created (or reused) and joined by an edge carrying the path weight; weights
    of repeated edges add up. AG unitigs without any edge that are long enough
    to be contigs on their own enter as standalone instances.
    """
    raw_edges: dict[tuple, int] = {}
    keys: set = set()
    for ps in all_paths:
        if ps is None or ps.anchor is None:
            continue
        ui, uj = ps.anchor
        for p, w in ps:
            pset = frozenset(p)
            a = (ui, frozenset(info.P(ui) & pset))
            b = (uj, frozenset(info.P(uj) & pset))
            keys.update((a, b))
            raw_edges[(a, b)] = raw_edges.get((a, b), 0) + w
    for u in sorted(ag.unitigs):
        if not ag.successors(u) and not ag.predecessors(u) and len(ag.unitigs[u]) >= min_isolated_len:
            keys.add((u, frozenset()))
    rep = _unify(keys, raw_edges)
    final = sorted(set(rep.values()), key=lambda key: (key[0], sorted(key[1])))
    nid = {key: i for i, key in enumerate(final)}
    nodes = {i: ApagNode(u, s) for (u, s), i in nid.items()}
    edges: dict[tuple[int, int], int] = {}
    for (a, b), w in sorted(raw_edges.items(), key=lambda t: (nid[rep[t[0][0]]], nid[rep[t[0][1]]])):
        x, y = nid[rep[a]], nid[rep[b]]
        if x != y:
            edges[(x, y)] = edges.get((x, y), 0) + w
    used = {n.unitig for n in nodes.values()}
    seqs = {u: ag.unitigs[u].seq for u in used}
    ab = {u: ag.unitigs[u].abundance for u in used}
    logger.info("APAG: %d nodes over %d unitigs, %d edges", len(nodes), len(used), len(edges))
    return Apag(ag.k, nodes, edges, seqs, ab)


def write_apag_gfa(apag: Apag, path) -> None:
    with open(path, "w") as fh:
        fh.write("H\tVN:Z:1.0\n")
        for n in sorted(apag.nodes):
            node = apag.nodes[n]
            pairs = ",".join(str(x) for x in sorted(node.pset))
            fh.write(f"S\t{n}\t{apag.seq(n)}\tdp:f:{apag.node_cov(n)}\tUT:i:{node.unitig}\tPS:Z:{pairs}\n")
        for (a, b), w in sorted(apag.edges.items()):
            fh.write(f"L\t{a}\t+\t{b}\t+\t{apag.k - 1}M\tFL:i:{w}\n")

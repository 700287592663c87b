"""De Bruijn graph construction, unitig compaction and assembly-graph polishing."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

from .kspectrum import SolidSet
from .seqio import revcomp

logger = logging.getLogger(__name__)

BASES = "ACGT"


@dataclass(frozen=True)
class Unitig:
    id: int
    seq: str
    kmer_count: int
    abundance: float

    def __len__(self) -> int:
        return len(self.seq)


@dataclass
class AssemblyGraph:
    """Directed unitig graph.

    In canonical mode the graph is strand-doubled: every unitig has a
    reverse-complement twin, so all traversal is plain directed traversal.
    """

    k: int
    unitigs: dict[int, Unitig]
    edges: dict[tuple[int, int], int]
    canonical: bool = False
    _succ: dict[int, list[int]] = field(default=None, repr=False, compare=False)
    _pred: dict[int, list[int]] = field(default=None, repr=False, compare=False)
    _index: dict[str, tuple[int, int]] = field(default=None, repr=False, compare=False)

    def __post_init__(self):
        self._rebuild_adjacency()

    def _rebuild_adjacency(self):
        succ = {u: [] for u in self.unitigs}
        pred = {u: [] for u in self.unitigs}
        for a, b in sorted(self.edges):
            succ[a].append(b)
            pred[b].append(a)
        self._succ, self._pred, self._index = succ, pred, None

    def successors(self, u: int) -> list[int]:
        return self._succ[u]

    def predecessors(self, u: int) -> list[int]:
        return self._pred[u]

    def support(self, a: int, b: int) -> int:
        return self.edges.get((a, b), 0)

    def node_abu(self, u: int) -> int:
        """Maximum support over edges incident to ``u`` (0 when isolated)."""
        vals = [self.edges[(p, u)] for p in self._pred[u]] + [self.edges[(u, s)] for s in self._succ[u]]
        return max(vals, default=0)

    def kmer_index(self) -> dict[str, tuple[int, int]]:
        """Map every k-mer of every unitig to (unitig id, offset)."""
        if self._index is None:
            k = self.k
            idx = {}
            for uid in sorted(self.unitigs):
                s = self.unitigs[uid].seq
                for i in range(len(s) - k + 1):
                    idx[s[i:i + k]] = (uid, i)
            self._index = idx
        return self._index

    def __len__(self) -> int:
        return len(self.unitigs)


def _kmer_graph(solid: SolidSet, k: int, canonical: bool):
    nodes = set(solid.kmers)
    if canonical:
        nodes |= {revcomp(x) for x in solid.kmers}
    spectrum = solid.spectrum
    use_junctions = spectrum is not None and bool(spectrum.edge_counts)

    def support(x: str, y: str) -> int:
        if use_junctions:
            return spectrum.edge_count(x + y[-1])
        if spectrum is not None:
            return min(spectrum.count(x), spectrum.count(y))
        return 1

    succ: dict[str, list[str]] = {}
    sup: dict[tuple[str, str], int] = {}
    for x in sorted(nodes):
        out = []
        for c in BASES:
            y = x[1:] + c
            if y in nodes:
                s = support(x, y)
                if s > 0:
                    out.append(y)
                    sup[(x, y)] = s
        succ[x] = out
    pred: dict[str, list[str]] = {x: [] for x in succ}
    for x in sorted(succ):
        for y in succ[x]:
            pred[y].append(x)
    return succ, pred, sup


def _compact(succ, pred):
    """Split the k-mer graph into maximal non-branching paths."""

    def joins(x, y):
        return len(succ[x]) == 1 and len(pred[y]) == 1 and x != y

    visited = set()
    paths = []
    for x in sorted(succ):
        if x in visited:
            continue
        if len(pred[x]) == 1 and joins(pred[x][0], x):
            continue  # interior node, reached from its chain start
        path = [x]
        visited.add(x)
        while len(succ[path[-1]]) == 1:
            y = succ[path[-1]][0]
            if y in visited or not joins(path[-1], y):
                break
            path.append(y)
            visited.add(y)
        paths.append(path)
    # isolated cycles where every node is interior
    for x in sorted(succ):
        if x in visited:
            continue
        path = [x]
        visited.add(x)
        while True:
            y = succ[path[-1]][0]
            if y in visited:
                break
            path.append(y)
            visited.add(y)
        paths.append(path)
    return paths


def build_assembly_graph(solid: SolidSet, k: int | None = None,
                         canonical: bool | None = None) -> AssemblyGraph:
    """Compact the de Bruijn graph of ``solid`` into an assembly graph.

    DBG edges are the k-1 overlaps between solid k-mers that are backed by at
    least one (k+1)-mer observed in the reads; without junction counts every
    overlap is an edge. Unitig ids follow the lexicographic order of sequences.
    """
    spectrum = solid.spectrum
    if k is None:
        if spectrum is not None:
            k = spectrum.k
        elif solid.kmers:
            k = len(next(iter(solid.kmers)))
        else:
            k = 0
    if canonical is None:
        canonical = spectrum.canonical if spectrum is not None else False
    if not solid.kmers:
        return AssemblyGraph(k, {}, {}, canonical)
    succ, pred, sup = _kmer_graph(solid, k, canonical)
    paths = _compact(succ, pred)

    def count(x):
        return spectrum.count(x) if spectrum is not None else 1

    seqs = sorted((p[0] + "".join(y[-1] for y in p[1:]), p) for p in paths)
    unitigs = {}
    first_of, last_of = {}, {}
    for uid, (seq, p) in enumerate(seqs):
        ab = sum(count(x) for x in p) / len(p)
        unitigs[uid] = Unitig(uid, seq, len(p), ab)
        first_of[p[0]] = uid
        last_of[p[-1]] = uid
    edges = {}
    for x, uid in sorted(last_of.items()):
        for y in succ[x]:
            if y in first_of:
                edges[(uid, first_of[y])] = sup[(x, y)]
    logger.info("assembly graph: %d unitigs, %d edges", len(unitigs), len(edges))
    return AssemblyGraph(k, unitigs, edges, canonical)


# --- polishing ---------------------------------------------------------------

def filigree_edges(ag: AssemblyGraph, ratio: float) -> list[tuple[int, int]]:
    """Edges with support·ratio below the weaker endpoint's abu(v)."""
    abu = {u: ag.node_abu(u) for u in ag.unitigs}
    return [e for e, s in sorted(ag.edges.items()) if s * ratio < min(abu[e[0]], abu[e[1]])]


def weak_tips(ag: AssemblyGraph, min_tip_len: int, ratio: float) -> list[int]:
    """Short dead-end unitigs that are much weaker than an alternative branch.

    A tip hanging off a fork is removed only when its abundance times ``ratio``
    stays below the strongest sibling; this keeps low-frequency haplotype ends.
    """
    out = []
    for u in sorted(ag.unitigs):
        ut = ag.unitigs[u]
        if len(ut) >= min_tip_len:
            continue
        ins, outs = ag.predecessors(u), ag.successors(u)
        if bool(ins) == bool(outs):
            continue
        if ins:
            sib = {s for p in ins for s in ag.successors(p)} - {u}
        else:
            sib = {p for s in outs for p in ag.predecessors(s)} - {u}
        if not sib:
            continue
        strongest = max(ag.unitigs[s].abundance for s in sib)
        if ut.abundance * ratio < strongest:
            out.append(u)
    return out


def polish_assembly_graph(ag: AssemblyGraph, min_tip_len: int | None = None,
                          ratio: float = 5.0, min_isolated_len: int = 500,
                          recompact: bool = True) -> AssemblyGraph:
    """Remove filigree edges, weak short tips and short isolated unitigs.

    Filigree edges and tips are tagged on the input graph and removed together.
    With ``recompact`` the surviving non-branching chains are merged again.
    """
    if ratio < 1:
        raise ValueError("ratio must be >= 1")
    if min_tip_len is None:
        min_tip_len = 2 * ag.k
    weak = set(filigree_edges(ag, ratio))
    tips = set(weak_tips(ag, min_tip_len, ratio))
    edges = {e: s for e, s in ag.edges.items()
             if e not in weak and e[0] not in tips and e[1] not in tips}
    touched = {u for e in edges for u in e}
    unitigs = {u: ut for u, ut in ag.unitigs.items()
               if u not in tips and (u in touched or len(ut) >= min_isolated_len)}
    logger.info("polish: %d filigree edges, %d tips, %d isolated removed", len(weak), len(tips),
                len(ag.unitigs) - len(tips) - len(unitigs))
    out = AssemblyGraph(ag.k, unitigs, edges, ag.canonical)
    return compact_graph(out) if recompact else out


def compact_graph(ag: AssemblyGraph) -> AssemblyGraph:
    """Merge chains u→v with outdeg(u)=1 and indeg(v)=1, then renumber by sequence."""
    k = ag.k

    def joins(a, b):
        return a != b and len(ag.successors(a)) == 1 and len(ag.predecessors(b)) == 1

    chains = []
    seen = set()
    for u in sorted(ag.unitigs):
        if u in seen:
            continue
        ps = ag.predecessors(u)
        if len(ps) == 1 and joins(ps[0], u):
            continue
        chain = [u]
        seen.add(u)
        while len(ag.successors(chain[-1])) == 1:
            v = ag.successors(chain[-1])[0]
            if v in seen or not joins(chain[-1], v):
                break
            chain.append(v)
            seen.add(v)
        chains.append(chain)
    for u in sorted(ag.unitigs):
        if u not in seen:
            chain = [u]
            seen.add(u)
            while ag.successors(chain[-1])[0] not in seen:
                chain.append(ag.successors(chain[-1])[0])
                seen.add(chain[-1])
            chains.append(chain)

    merged = []
    for chain in chains:
        parts = [ag.unitigs[u] for u in chain]
        seq = parts[0].seq + "".join(p.seq[k - 1:] for p in parts[1:])
        n = sum(p.kmer_count for p in parts)
        ab = sum(p.abundance * p.kmer_count for p in parts) / n
        merged.append((seq, n, ab, chain))
    merged.sort()
    unitigs, head, tail = {}, {}, {}
    for uid, (seq, n, ab, chain) in enumerate(merged):
        unitigs[uid] = Unitig(uid, seq, n, ab)
        head[chain[0]] = uid
        tail[chain[-1]] = uid
    edges = {}
    for (a, b), s in ag.edges.items():
        if a in tail and b in head:
            edges[(tail[a], head[b])] = s
    return AssemblyGraph(k, unitigs, edges, ag.canonical)


def write_gfa(ag: AssemblyGraph, path) -> None:
    with open(path, "w") as fh:
        fh.write("H\tVN:Z:1.0\n")
        for uid in sorted(ag.unitigs):
            u = ag.unitigs[uid]
            fh.write(f"S\t{uid}\t{u.seq}\tdp:f:{u.abundance:.3f}\n")
        for (a, b), s in sorted(ag.edges.items()):
            fh.write(f"L\t{a}\t+\t{b}\t+\t{ag.k - 1}M\tRC:i:{s}\n")


"""APAG polishing, haplotype extraction, LP abundance polish and contig output."""

from __future__ import annotations

import heapq
import json
import logging
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import linprog

from .decompose import Apag, WeightedPathSet
from .flow import apply_flow_correction, build_offset_network, solve_min_cost_flow
from .seqio import revcomp, write_fasta

logger = logging.getLogger(__name__)

MIN_CONTIG_LEN = 500
ZERO_FREQ = 1e-9


@dataclass
class Contig:
    id: str
    seq: str
    freq: float
    raw_flow: float
    path: tuple[int, ...]

    def __len__(self) -> int:
        return len(self.seq)


@dataclass
class ContigSet:
    contigs: list[Contig] = field(default_factory=list)

    def __len__(self) -> int:
        return len(self.contigs)

    def __iter__(self):
        return iter(self.contigs)

    @property
    def freqs(self) -> list[float]:
        return [c.freq for c in self.contigs]


# --- graph helpers -------------------------------------------------------------

def spell(apag: Apag, path) -> str:
    """Concatenate node sequences along ``path`` with k-1 overlaps trimmed."""
    k = apag.k
    seq = apag.seq(path[0])
    for n in path[1:]:
        nxt = apag.seq(n)
        if seq[len(seq) - (k - 1):] != nxt[:k - 1]:
            raise ValueError(f"overlap mismatch entering node {n}")
        seq += nxt[k - 1:]
    return seq


def spelled_length(apag: Apag, path) -> int:
    return sum(apag.length(n) for n in path) - (len(path) - 1) * (apag.k - 1)


def _components(nodes, edges):
    adj: dict[int, set[int]] = {n: set() for n in nodes}
    for a, b in edges:
        adj[a].add(b)
        adj[b].add(a)
    seen, comps = set(), []
    for n in sorted(nodes):
        if n in seen:
            continue
        comp, stack = [], [n]
        seen.add(n)
        while stack:
            x = stack.pop()
            comp.append(x)
            for y in adj[x]:
                if y not in seen:
                    seen.add(y)
                    stack.append(y)
        comps.append(sorted(comp))
    return comps


def _longest_spell(apag: Apag, comp, edges) -> int:
    """Longest spelled path length inside a component (DAG assumed; cycles cut)."""
    k = apag.k
    comp_set = set(comp)
    succ = {n: [] for n in comp}
    indeg = {n: 0 for n in comp}
    for a, b in edges:
        if a in comp_set:
            succ[a].append(b)
            indeg[b] += 1
    best = {n: apag.length(n) for n in comp}
    ready = [n for n in comp if indeg[n] == 0]
    done = 0
    while ready:
        n = ready.pop()
        done += 1
        for m in succ[n]:
            best[m] = max(best[m], best[n] + apag.length(m) - (k - 1))
            indeg[m] -= 1
            if indeg[m] == 0:
                ready.append(m)
    return max(best.values())


def polish_apag(apag: Apag, min_len: int = MIN_CONTIG_LEN, tip_len: int | None = None,
                ratio: float = 5.0) -> Apag:
    """Remove short isolated nodes, short weak tips and components whose longest
    path spells fewer than ``min_len`` bp."""
    if tip_len is None:
        tip_len = 2 * apag.k
    edges = dict(apag.edges)
    drop = set()
    for n in sorted(apag.nodes):
        ins = [a for (a, b) in edges if b == n]
        outs = [b for (a, b) in edges if a == n]
        if bool(ins) == bool(outs) or apag.length(n) >= tip_len:
            continue
        if ins:
            sib = {b for (a, b) in edges if a in ins} - {n}
        else:
            sib = {a for (a, b) in edges if b in outs} - {n}
        if sib and apag.node_cov(n) * ratio < max(apag.node_cov(s) for s in sib):
            drop.add(n)
    edges = {e: w for e, w in edges.items() if e[0] not in drop and e[1] not in drop}
    keep = set()
    nodes = [n for n in apag.nodes if n not in drop]
    for comp in _components(nodes, edges):
        if _longest_spell(apag, comp, edges) >= min_len:
            keep.update(comp)
    out = Apag(apag.k, {n: apag.nodes[n] for n in sorted(keep)},
               {e: w for e, w in sorted(edges.items()) if e[0] in keep and e[1] in keep},
               apag.seqs, apag.abundance)
    if not out.nodes:
        logger.warning("APAG empty after polishing")
    return out


# --- extraction ------------------------------------------------------------------

def _widest_path(flow: dict[tuple[int, int], int], sources, sinks):
    """Max-bottleneck source→sink path over positive residual flow."""
    succ: dict[int, list[tuple[int, int]]] = {}
    for (a, b), c in sorted(flow.items()):
        if c > 0:
            succ.setdefault(a, []).append((b, c))
    best: dict[int, int] = {}
    prev: dict[int, int | None] = {}
    heap = []
    for s in sources:
        if s in succ:
            best[s] = 1 << 62
            prev[s] = None
            heap.append((-best[s], s))
    heapq.heapify(heap)
    done = set()
    while heap:
        negw, u = heapq.heappop(heap)
        if u in done:
            continue
        done.add(u)
        for v, c in succ.get(u, []):
            w = min(-negw, c)
            if v not in done and w > best.get(v, 0):
                best[v] = w
                prev[v] = u
                heapq.heappush(heap, (-w, v))
    ends = [t for t in sinks if t in best and prev.get(t) is not None]
    if not ends:
        return None, 0
    t = max(ends, key=lambda t: (best[t], -t))
    path = [t]
    while prev[path[-1]] is not None:
        path.append(prev[path[-1]])
    return tuple(reversed(path)), best[t]


def _guided_path(flow: dict[tuple[int, int], int], apag: Apag, info):
    """Greedy source→sink walk over positive residual flow.

    Starts on the heaviest edge leaving a source. At a fork each branch is
    scored by how many unitigs already on the path list its unitig as a paired
    mate; the best-scored branches are kept and the heaviest of them taken.
    """
    succ: dict[int, list[tuple[int, int]]] = {}
    heads = set()
    for (a, b), c in sorted(flow.items()):
        if c > 0:
            succ.setdefault(a, []).append((b, c))
            heads.add(b)
    starts = [(c, a, b) for a, outs in succ.items() if a not in heads for b, c in outs]
    if not starts:
        return None, 0
    _, a, b = max(starts, key=lambda t: (t[0], -t[1], -t[2]))
    path = [a, b]
    while True:
        cand = [(v, c) for v, c in succ.get(path[-1], []) if v not in path]
        if not cand:
            break
        if len(cand) > 1 and info is not None:
            units = [apag.nodes[x].unitig for x in path]
            votes = [sum(1 for u in units if apag.nodes[v].unitig in info.P(u)) for v, _ in cand]
            if max(votes) > 0:
                cand = [vc for vc, n in zip(cand, votes) if n == max(votes)]
        path.append(max(cand, key=lambda t: (t[1], -t[0]))[0])
    return tuple(path), min(flow[e] for e in zip(path[:-1], path[1:]))


def extract_haplotypes(apag: Apag, info=None) -> WeightedPathSet:
    """Min-cost-flow correction of the APAG, then greedy path peeling.

    The offset network penalises each edge's departure from its suggested flow
    quadratically, which is the (x - cov')² cost on the corrected edge flow.
    Without paired information the heaviest (widest) residual path is peeled
    each round; with it, forks follow the paired mates of the walked unitigs.
    Standalone nodes become single-node paths weighted by their abundance.
    """
    out = WeightedPathSet()
    if apag.edges:
        net = build_offset_network(apag)
        sol = solve_min_cost_flow(net)
        flow = apply_flow_correction(apag, net, sol)
        sources, sinks = apag.sources(), apag.sinks()
        while True:
            if info is None:
                path, w = _widest_path(flow, sources, sinks)
            else:
                path, w = _guided_path(flow, apag, info)
            if path is None or w <= 0:
                break
            for e in zip(path[:-1], path[1:]):
                flow[e] -= w
            out.add(path, w)
        left = sum(c for c in flow.values() if c > 0)
        if left:
            logger.info("%d units of APAG flow not on any source-sink path", left)
    for n in apag.isolated():
        out.add((n,), apag.node_cov(n))
    return out


def merge_end_variants(apag: Apag, paths: WeightedPathSet, margin: int) -> WeightedPathSet:
    """Fold paths that differ only within ``margin`` bp of a head or tail into
    the heaviest path sharing their interior; weights add up.

    Forward paired links cannot phase the last insert length of a genome, so
    variants confined there are not evidence of a distinct haplotype.
    """
    if margin <= 0 or not len(paths) or not apag.edges:
        return paths
    head, tail = _end_distances(apag)

    def interior(p):
        return tuple(apag.nodes[n].unitig for n in p
                     if head.get(n, 0) >= margin and tail.get(n, 0) >= margin)

    order = sorted(range(len(paths)), key=lambda i: (-paths.weights[i], i))
    keep: dict[tuple, int] = {}
    weight: dict[int, int] = {}
    for i in order:
        key = interior(paths.paths[i])
        if key and key in keep:
            weight[keep[key]] += paths.weights[i]
            continue
        if key:
            keep[key] = i
        weight[i] = paths.weights[i]
    out = WeightedPathSet(anchor=paths.anchor)
    for i in sorted(weight):
        out.add(paths.paths[i], weight[i])
    if len(out) < len(paths):
        logger.info("merged %d end-variant paths", len(paths) - len(out))
    return out


# --- LP polish -------------------------------------------------------------------

def _end_distances(apag: Apag):
    """Shortest spelled distance from any source to each node's start and from
    each node's end to any sink."""
    k = apag.k
    nodes = apag.active_nodes()
    succ = {n: apag.successors(n) for n in nodes}
    pred = {n: apag.predecessors(n) for n in nodes}
    order, indeg = [], {n: len(pred[n]) for n in nodes}
    ready = sorted(n for n in nodes if indeg[n] == 0)
    while ready:
        n = ready.pop()
        order.append(n)
        for m in succ[n]:
            indeg[m] -= 1
            if indeg[m] == 0:
                ready.append(m)
    head = {n: 0 for n in nodes if not pred[n]}
    for n in order:
        for m in succ[n]:
            d = head.get(n, 0) + apag.length(n) - (k - 1)
            head[m] = min(head.get(m, d), d)
    tail = {n: 0 for n in nodes if not succ[n]}
    for n in reversed(order):
        for p in pred[n]:
            d = tail.get(n, 0) + apag.length(n) - (k - 1)
            tail[p] = min(tail.get(p, d), d)
    return head, tail


def _lp_terms(apag: Apag, paths: WeightedPathSet, end_margin: int | None = None):
    """LP rows (unitig, abundance, weight, member paths).

    Heads and tails carry unreliable abundances. Without ``end_margin``,
    source and sink unitigs shorter than 2k are left out; with it, every
    unitig having a node that starts within ``end_margin`` bp of a source or
    ends within ``end_margin`` bp of a sink is left out.
    """
    k = apag.k
    if end_margin is None:
        ends = set(apag.sources()) | set(apag.sinks())
        skip = {apag.nodes[n].unitig for n in ends if apag.length(n) < 2 * k}
    else:
        head, tail = _end_distances(apag)
        skip = {apag.nodes[n].unitig for n in head if head[n] < end_margin or tail[n] < end_margin}
    members: dict[int, set[int]] = {}
    for i, (p, _) in enumerate(paths):
        for n in p:
            members.setdefault(apag.nodes[n].unitig, set()).add(i)
    rows = []
    for u in sorted(members):
        if u in skip:
            continue
        L = len(apag.seqs[u])
        wt = L / k - 1
        if wt <= 0:
            continue
        rows.append((u, float(apag.abundance[u]), wt, sorted(members[u])))
    return rows


def lp_objective(rows, f, x) -> float:
    return float(sum(wt * abs(ab - sum(f[i] * x[i] for i in idx)) for _, ab, wt, idx in rows))


def _abs_rows(rows, f, n_paths: int, nv: int):
    """Inequalities ab - fx <= s and fx - ab <= s, one slack per row."""
    A, b = [], []
    for r, (_, ab, _, idx) in enumerate(rows):
        row = np.zeros(nv)
        for i in idx:
            row[i] = f[i]
        lo = -row.copy()
        lo[n_paths + r] = -1
        hi = row.copy()
        hi[n_paths + r] = -1
        A += [lo, hi]
        b += [-ab, ab]
    return A, b


# HiGHS defaults (1e-7) let the tie-break stages drift the misfit by ~1e-5
_LP_OPTS = {"primal_feasibility_tolerance": 1e-10, "dual_feasibility_tolerance": 1e-10}


def _tighten(A_ub, b_ub, obj, bounds):
    """Minimise ``obj`` on the current face and add it as a constraint."""
    r = linprog(obj, A_ub=A_ub, b_ub=b_ub, bounds=bounds, method="highs", options=_LP_OPTS)
    if r.status != 0:
        return A_ub, b_ub, None
    tol = 1e-11 * max(1.0, abs(r.fun))
    return np.vstack([A_ub, obj]), np.append(b_ub, r.fun + tol), r.x


def solve_abs_lp(rows, f, n_paths: int) -> np.ndarray:
    """Minimise sum_u w_u |ab_u - sum f_i x_i| over x >= 0 via slack variables.

    Ties between optima are broken towards no polish: first the largest
    departure max_i |x_i - 1| is minimised, which rescales interchangeable
    paths alike, then sum_i f_i |x_i - 1|, then x is taken lexicographically
    smallest.
    """
    if n_paths == 0:
        raise ValueError("nothing to polish")
    m = len(rows)
    # variables: x, row slacks, deviations d_i >= |x_i - 1|, bound z >= d_i
    dev0, z = n_paths + m, n_paths + m + n_paths
    nv = z + 1
    A, b = _abs_rows(rows, f, n_paths, nv)
    for i in range(n_paths):
        for sign in (1.0, -1.0):
            row = np.zeros(nv)
            row[i] = sign
            row[dev0 + i] = -1
            A.append(row)
            b.append(sign)
        row = np.zeros(nv)
        row[dev0 + i] = 1
        row[z] = -1
        A.append(row)
        b.append(0.0)
    A_ub, b_ub = np.array(A), np.array(b)
    bounds = [(0, None)] * nv
    c = np.zeros(nv)
    for r, (_, _, wt, _) in enumerate(rows):
        c[n_paths + r] = wt
    A_ub, b_ub, x = _tighten(A_ub, b_ub, c, bounds)
    if x is None:
        raise RuntimeError("LP failed")
    worst = np.zeros(nv)
    worst[z] = 1.0
    spread = np.zeros(nv)
    spread[dev0:dev0 + n_paths] = f
    for obj in (worst, spread):
        A_ub, b_ub, y = _tighten(A_ub, b_ub, obj, bounds)
        if y is not None:
            x = y
    fixed = list(bounds)
    for i in range(n_paths):
        obj = np.zeros(nv)
        obj[i] = 1.0
        r = linprog(obj, A_ub=A_ub, b_ub=b_ub, bounds=fixed, method="highs", options=_LP_OPTS)
        if r.status != 0:
            break
        x = r.x
        fixed[i] = (r.x[i], r.x[i] + 1e-12)
    return np.asarray(x[:n_paths])


def lp_polish_abundances(apag: Apag, paths: WeightedPathSet,
                         end_margin: int | None = None) -> np.ndarray:
    """Per-path multipliers x minimising the length-weighted abundance misfit.

    Nodes are grouped by unitig, since a unitig's abundance covers every
    haplotype instance; source and sink unitigs shorter than 2k are left out.
    Paths touching no counted unitig keep x = 1.
    """
    if not len(paths):
        raise ValueError("nothing to polish")
    rows = _lp_terms(apag, paths, end_margin)
    f = [float(w) for w in paths.weights]
    x = np.ones(len(paths))
    covered = sorted({i for *_, idx in rows for i in idx})
    if not covered:
        return x
    remap = {i: j for j, i in enumerate(covered)}
    sub_rows = [(u, ab, wt, [remap[i] for i in idx]) for u, ab, wt, idx in rows]
    xs = solve_abs_lp(sub_rows, [f[i] for i in covered], len(covered))
    for i, j in remap.items():
        x[i] = xs[j]
    return x


# --- output ----------------------------------------------------------------------

def _kmer_set(seq: str, k: int) -> set[str]:
    return {seq[i:i + k] for i in range(len(seq) - k + 1)}


def emit_contigs(apag: Apag, paths: WeightedPathSet, multipliers, min_len: int = MIN_CONTIG_LEN,
                 dedupe_revcomp: bool = False, twin_overlap: float = 0.9) -> ContigSet:
    """Spell paths, drop short ones and those the LP polish zeroed out, and
    normalise flow·multiplier to frequencies.

    With ``dedupe_revcomp`` (strand-doubled graphs) a contig is dropped when
    at least ``twin_overlap`` of its k-mers occur reverse-complemented in a
    heavier contig already kept: it is the other strand of that haplotype.
    """
    cands = []
    values = [float(w) * float(x) for (_, w), x in zip(paths, multipliers)]
    floor = ZERO_FREQ * max(sum(values), 1e-300)
    for (p, w), x in zip(paths, multipliers):
        seq = spell(apag, p)
        if len(seq) < min_len or float(w) * float(x) <= floor:
            continue
        cands.append((seq, float(w), float(w) * float(x), p))
    cands.sort(key=lambda t: (-t[2], t[0]))
    items = []
    kept_kmers: list[set[str]] = []
    k = apag.k
    for seq, raw, val, p in cands:
        if dedupe_revcomp:
            rc = _kmer_set(revcomp(seq), k)
            if rc and any(len(rc & other) >= twin_overlap * len(rc) for other in kept_kmers):
                continue
            kept_kmers.append(_kmer_set(seq, k))
        items.append((seq, raw, val, p))
    total = sum(v for _, _, v, _ in items)
    contigs = []
    for i, (seq, raw, val, p) in enumerate(items):
        freq = val / total if total > 0 else 1.0 / len(items)
        contigs.append(Contig(f"contig_{i}", seq, freq, raw, tuple(p)))
    return ContigSet(contigs)


def write_contigs_fasta(contigs: ContigSet, path) -> None:
    write_fasta(((f"{c.id} freq={c.freq:.6f} len={len(c)}", c.seq) for c in contigs), path)


def write_abundance_tsv(contigs: ContigSet, path) -> None:
    with open(path, "w") as fh:
        fh.write("contig\traw_flow\tfrequency\n")
        for c in contigs:
            fh.write(f"{c.id}\t{c.raw_flow:.6g}\t{c.freq:.6f}\n")


def write_summary_json(summary: dict, path) -> None:
    with open(path, "w") as fh:
        json.dump(summary, fh, indent=2, sort_keys=True)
        fh.write("\n")

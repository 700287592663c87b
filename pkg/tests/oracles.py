"""Independent reference solvers used by the tests."""

from __future__ import annotations

import itertools
import math
import random

import numpy as np

from quasiflow.dagcov import LocalDag


def random_dag(rng: random.Random, max_nodes: int = 8, max_cov: int = 10,
               p: float = 0.35, max_edges: int = 7) -> LocalDag:
    """Random connected-ish DAG on nodes 0..n-1 with edges i<j."""
    while True:
        n = rng.randint(2, max_nodes)
        pairs = [(i, j) for i in range(n) for j in range(i + 1, n) if rng.random() < p]
        rng.shuffle(pairs)
        pairs = sorted(pairs[:max_edges])
        if pairs:
            break
    edges = {e: rng.randint(0, max_cov) for e in pairs}
    anchor = pairs[0]
    nodes = tuple(sorted({u for e in pairs for u in e}))
    return LocalDag(anchor, nodes, edges, edges[anchor])


def conserves(dag: LocalDag, corrected: dict) -> bool:
    for v in dag.active_nodes():
        ins = [c for (a, b), c in corrected.items() if b == v]
        outs = [c for (a, b), c in corrected.items() if a == v]
        if ins and outs and sum(ins) != sum(outs):
            return False
    return all(c >= 0 for c in corrected.values())


def _node_value(dag: LocalDag, corrected: dict, v: int) -> int:
    ins = [e for e in dag.edges if e[1] == v]
    if ins:
        return sum(corrected[e] for e in ins)
    return sum(corrected[e] for e in dag.edges if e[0] == v)


def flow_objective(dag: LocalDag, corrected: dict) -> int:
    """Squared edge and node departures of a conserving coverage assignment."""
    cost = sum((corrected[e] - c) ** 2 for e, c in dag.edges.items())
    for v in dag.active_nodes():
        cost += (_node_value(dag, corrected, v) - dag.node_cov(v)) ** 2
    return cost


def _compositions(total: int, parts: int):
    if parts == 1:
        yield (total,)
        return
    for x in range(total + 1):
        for rest in _compositions(total - x, parts - 1):
            yield (x,) + rest


def brute_force_correction(dag: LocalDag, upper: float | None = None) -> tuple[int, dict]:
    """Exact optimum over all integral conserving corrections.

    Nodes are visited in topological order. An internal node passes its
    inflow on through every composition over its out-edges, a source tries
    every out-edge value whose squared change fits under the incumbent, and
    a sink only pays its node term. Partial assignments that leave the same
    pending inflow on every unvisited node are interchangeable for the rest
    of the search, so only the cheapest of them is kept. No fixed box is
    imposed: a correction may exceed the largest coverage. The incumbent is
    ``upper`` when given (any achievable cost), else the all-zero
    assignment, which always conserves; the optimum does not depend on it.
    """
    ncov = {v: dag.node_cov(v) for v in dag.active_nodes()}
    if upper is None:
        upper = sum(c * c for c in dag.edges.values()) + sum(c * c for c in ncov.values())
    outs = {v: [e for e in sorted(dag.edges) if e[0] == v] for v in ncov}
    has_in = {b for (_, b) in dag.edges}
    # state: pending inflow per unvisited node -> (cost, assignment)
    states = {(): (0, {})}
    for v in dag.topological_order():
        nxt: dict = {}
        for key, (cost, val) in states.items():
            pending = dict(key)
            inflow = pending.pop(v, 0)
            base = cost
            if v in has_in:
                base += (inflow - ncov[v]) ** 2
            if base > upper:
                continue
            es = outs[v]
            if not es:
                choices = [()]
            elif v in has_in:
                choices = _compositions(inflow, len(es))
            else:
                r = math.isqrt(int(upper - base))
                ranges = [range(max(0, dag.edges[e] - r), dag.edges[e] + r + 1) for e in es]
                choices = itertools.product(*ranges)
            for xs in choices:
                c = base + sum((x - dag.edges[e]) ** 2 for x, e in zip(xs, es))
                if v not in has_in and es:
                    c += (sum(xs) - ncov[v]) ** 2
                if c > upper:
                    continue
                p = dict(pending)
                for x, e in zip(xs, es):
                    p[e[1]] = p.get(e[1], 0) + x
                k = tuple(sorted(p.items()))
                if k not in nxt or c < nxt[k][0]:
                    nv = dict(val)
                    nv.update(zip(es, xs))
                    nxt[k] = (c, nv)
        states = nxt
    if not states:
        raise ValueError("upper bound below the optimum")
    cost, val = min(states.values(), key=lambda t: t[0])
    return int(cost), val


def naive_correction(dag: LocalDag, radius: int) -> int:
    """Plain enumeration of every edge vector within ``radius`` of the coverages."""
    es = sorted(dag.edges)
    ranges = [range(max(0, dag.edges[e] - radius), dag.edges[e] + radius + 1) for e in es]
    best = math.inf
    for xs in itertools.product(*ranges):
        val = dict(zip(es, xs))
        if conserves(dag, val):
            best = min(best, flow_objective(dag, val))
    return best


def grid_search_1d(ab, wt, f, lo: float = 0.0, hi: float | None = None, steps: int = 20001):
    """Minimise sum_u wt_u |ab_u - f x| over x >= 0 on a grid plus breakpoints."""
    ab, wt = np.asarray(ab, float), np.asarray(wt, float)
    bps = ab / f
    if hi is None:
        hi = 2.0 * max(float(bps.max()), 1.0)
    xs = np.concatenate([np.linspace(lo, hi, steps), bps[bps >= 0]])
    vals = np.abs(ab[None, :] - f * xs[:, None]) @ wt
    i = int(np.argmin(vals))
    return float(xs[i]), float(vals[i])

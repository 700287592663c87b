import random

import networkx as nx
import pytest

from conftest import FIG3_EDGES, ag_from
from quasiflow.dbg import (AssemblyGraph, Unitig, build_assembly_graph, compact_graph,
                           filigree_edges, polish_assembly_graph, weak_tips, write_gfa)
from quasiflow.kspectrum import KmerSpectrum, SolidSet
from quasiflow.seqio import revcomp


def solid_of(seqs, k, spectrum=None):
    return SolidSet(1, frozenset(s[i:i + k] for s in seqs for i in range(len(s) - k + 1)), spectrum)


def test_linear_chain_is_one_unitig():
    ag = build_assembly_graph(solid_of(["ACGTT"], 3), k=3, canonical=False)
    assert [u.seq for u in ag.unitigs.values()] == ["ACGTT"]
    assert ag.edges == {}


def test_bubble_fork_core_join():
    a, b = "ACTGACCGTTAG", "ACTGACAGTTAG"
    ag = build_assembly_graph(solid_of([a, b], 4), k=4, canonical=False)
    seqs = {u.seq: u.id for u in ag.unitigs.values()}
    assert set(seqs) == {"ACTGAC", "GACCGTT", "GACAGTT", "GTTAG"}
    fork, join = seqs["ACTGAC"], seqs["GTTAG"]
    arms = {seqs["GACCGTT"], seqs["GACAGTT"]}
    assert set(ag.edges) == {(fork, x) for x in arms} | {(x, join) for x in arms}


def test_two_haplotypes_compact_to_worked_example_shape():
    x, y = "GATTACAGCCTTAGCA", "CCGTATGGACTCAAGT"
    h1, h2 = x + "A" + y + "TCGGTAC", x + "T" + y + "GAACTTG"
    ag = build_assembly_graph(solid_of([h1, h2], 7), k=7, canonical=False)
    assert len(ag.unitigs) == 6
    got = nx.DiGraph(list(ag.edges))
    want = nx.DiGraph(list(FIG3_EDGES))
    assert nx.is_isomorphic(got, want)
    # every unitig is spelled by one of the haplotypes
    assert all(u.seq in h1 or u.seq in h2 for u in ag.unitigs.values())


def test_canonical_graph_is_strand_doubled():
    seq = "GATTACAGCCTTAGCAACCGT"
    solid = SolidSet(1, frozenset(min(s, revcomp(s)) for s in
                                  (seq[i:i + 7] for i in range(len(seq) - 6))))
    ag = build_assembly_graph(solid, k=7, canonical=True)
    seqs = sorted(u.seq for u in ag.unitigs.values())
    assert seqs == sorted([seq, revcomp(seq)])


def test_junction_support_gates_edges():
    a = "ACTGACCGTTAG"
    k = 4
    counts = {a[i:i + k]: 3 for i in range(len(a) - k + 1)}
    edge_counts = {a[i:i + k + 1]: 3 for i in range(len(a) - k)}
    del edge_counts[a[4:9]]
    sp = KmerSpectrum(k, counts, canonical=False, edge_counts=edge_counts)
    ag = build_assembly_graph(SolidSet(1, frozenset(counts), sp))
    # the unseen (k+1)-mer breaks the chain in two
    assert len(ag.unitigs) == 2 and len(ag.edges) == 0


def test_filigree_strict_inequality():
    ag = ag_from({(1, 2): 1, (2, 3): 10, (3, 4): 10})
    assert ag.node_abu(2) == 10
    assert (1, 2) not in filigree_edges(ag, 5)  # abu(1) is 1 here
    ag = ag_from({(0, 1): 10, (1, 2): 1, (2, 3): 10})
    assert filigree_edges(ag, 5) == [(1, 2)]  # 5 < 10
    ag = ag_from({(0, 1): 10, (1, 2): 2, (2, 3): 10})
    assert filigree_edges(ag, 5) == []  # 10 < 10 is false


def test_polish_removes_filigree_against_original_abundance():
    rng = random.Random(11)
    for _ in range(30):
        n = rng.randint(4, 12)
        edges = {}
        for _ in range(rng.randint(3, 20)):
            a, b = rng.sample(range(n), 2)
            edges[(a, b)] = rng.randint(1, 30)
        ag = ag_from(edges)
        out = polish_assembly_graph(ag, ratio=5, min_isolated_len=0, recompact=False)
        abu = {u: ag.node_abu(u) for u in ag.unitigs}
        for (a, b), s in out.edges.items():
            assert not s * 5 < min(abu[a], abu[b])


def test_weak_tip_removed_strong_tip_kept():
    k = 5
    units = {0: Unitig(0, "A" * 40, 36, 50.0), 1: Unitig(1, "C" * 40, 36, 50.0),
             2: Unitig(2, "G" * 6, 2, 2.0), 3: Unitig(3, "T" * 6, 2, 40.0)}
    ag = AssemblyGraph(k, units, {(0, 1): 50, (0, 2): 20, (0, 3): 20})
    assert weak_tips(ag, 2 * k, 5) == [2]


def test_compact_merges_chain_and_keeps_sequence():
    k = 3
    units = {0: Unitig(0, "ACGT", 2, 4.0), 1: Unitig(1, "GTTA", 2, 8.0)}
    ag = compact_graph(AssemblyGraph(k, units, {(0, 1): 5}))
    assert [u.seq for u in ag.unitigs.values()] == ["ACGTTA"]
    assert ag.unitigs[0].kmer_count == 4 and ag.unitigs[0].abundance == pytest.approx(6.0)


def test_ratio_below_one_rejected():
    with pytest.raises(ValueError):
        polish_assembly_graph(ag_from({(1, 2): 3}), ratio=0.5)


def test_gfa_output(tmp_path):
    ag = ag_from({(1, 2): 3})
    write_gfa(ag, tmp_path / "g.gfa")
    lines = (tmp_path / "g.gfa").read_text().splitlines()
    assert lines[0].startswith("H") and sum(l.startswith("S") for l in lines) == 2
    assert "L\t1\t+\t2\t+\t4M\tRC:i:3" in lines

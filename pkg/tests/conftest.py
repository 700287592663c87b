"""Shared fixtures: hand-built assembly graphs and simulated samples."""

from __future__ import annotations

import warnings

import pytest

from quasiflow.dbg import AssemblyGraph, Unitig
from quasiflow.pairing import PairedInfo, build_paired_with_index
from quasiflow.pipeline import AssemblyConfig, assemble
from quasiflow.simulate import simulate_reads, simulate_sample

# Lines collected by the acceptance suite and echoed after the run.
ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


def ag_from(edges, k: int = 5, length: int = 20, abundance: float = 10.0) -> AssemblyGraph:
    """Coverage-only graph: every unitig is a poly-A run, edges carry support."""
    ids = sorted({u for e in edges for u in e})
    unitigs = {u: Unitig(u, "A" * length, length - k + 1, abundance) for u in ids}
    return AssemblyGraph(k, unitigs, dict(edges))


def paired(forward: dict) -> PairedInfo:
    return build_paired_with_index(PairedInfo({u: frozenset(v) for u, v in forward.items()}))


# The worked example graph: branch at U1, join at U4, split again after U4.
FIG3_EDGES = {(1, 2): 10, (1, 3): 10, (2, 4): 10, (3, 4): 10, (4, 5): 10, (4, 6): 12}
FIG3_PAIRS = {2: {4, 5}, 4: {5, 6}}

# Extract used to trace the bag computation of cov(s, e).
TRACE_IDS = dict(ui=1, uj=2, uw=3, s=4, u1=5, ui1=6, u2=7, ui2=8, u3=9, u4=10, e=11, x=12)


def _trace_edges():
    n = TRACE_IDS
    pairs = [("ui", "uj", 5), ("uw", "uj", 10), ("uj", "s", 15), ("s", "u1", 15),
             ("ui1", "u1", 10), ("u1", "u2", 25), ("ui2", "u2", 3), ("u2", "u3", 5),
             ("u2", "u4", 23), ("u3", "e", 5), ("u4", "x", 23)]
    return {(n[a], n[b]): c for a, b, c in pairs}


@pytest.fixture
def fig3_graph():
    return ag_from(FIG3_EDGES), paired(FIG3_PAIRS)


@pytest.fixture
def trace_graph():
    n = TRACE_IDS
    return ag_from(_trace_edges()), paired({n["ui"]: {n["s"], n["e"]}})


E2E_K = 31


def e2e_sample(seed: int, error_rate: float):
    sample = simulate_sample(2000, 2, 0.02, (0.3, 0.7), seed=seed)
    reads = simulate_reads(sample, 200, 100, 350, 35, error_rate, seed=seed + 1)
    return sample, reads


@pytest.fixture(scope="session")
def e2e_clean():
    """Error-free 2-haplotype sample, its reads and the assembly."""
    sample, reads = e2e_sample(1, 0.0)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        res = assemble(reads, AssemblyConfig(kmer_size=E2E_K, forward_only=True))
    return sample, reads, res

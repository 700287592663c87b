import math
import random

import pytest

from oracles import (brute_force_correction, conserves, flow_objective, naive_correction,
                     random_dag)
from quasiflow.dagcov import LocalDag
from quasiflow.flow import (FlowAssignment, apply_flow_correction, build_offset_network,
                            correct_dag, solve_min_cost_flow, write_network)

FIG4B = LocalDag((2, 4), (2, 4, 5, 6), {(2, 4): 10, (4, 5): 10, (4, 6): 2}, 10)


def test_offset_network_of_worked_example():
    net = build_offset_network(FIG4B)
    assert len(net.nodes) == 2 * 4 + 4
    # U4 receives 10 and sends 12: a 2-unit balance arc on its out side
    bal = [a for a in net.arcs if a.tag and a.tag[0] == "balance" and a.tag[1].startswith("4_")]
    assert [(a.tail, a.head, a.cap) for a in bal] == [("4_out", "T*", 2)]
    assert net.imbalance["4_out"] == 2 and net.imbalance["4_in"] == 0


def test_balanced_dag_has_no_balance_arcs():
    dag = LocalDag((1, 2), (1, 2, 3), {(1, 2): 5, (2, 3): 5})
    net = build_offset_network(dag)
    assert not [a for a in net.arcs if a.tag and a.tag[0] == "balance"]
    assert net.q["S*"] == 0 and net.q["T*"] == 0


def test_network_counts():
    rng = random.Random(3)
    for _ in range(50):
        dag = random_dag(rng)
        net = build_offset_network(dag)
        n, m = len(dag.active_nodes()), len(dag.edges)
        unbalanced = sum(1 for v in dag.active_nodes() if dag.predecessors(v)
                         and dag.successors(v) and dag.in_cov(v) != dag.out_cov(v))
        assert len(net.nodes) == 2 * n + 4
        assert len(net.arcs) == (2 * n + 2 * m + len(dag.sources()) + len(dag.sinks())
                                 + unbalanced + 1)


def test_consistent_dag_needs_no_correction():
    dag = LocalDag((1, 2), (1, 2, 3, 4), {(1, 2): 5, (1, 3): 4, (2, 4): 5, (3, 4): 4})
    net = build_offset_network(dag)
    flow = solve_min_cost_flow(net)
    assert flow.objective == 0
    assert all(x == 0 for a, x in zip(net.arcs, flow.flows) if a.cost != "zero")
    assert apply_flow_correction(dag, net, flow) == dag.edges


def test_zero_flow_is_identity():
    net = build_offset_network(FIG4B)
    zero = FlowAssignment([0] * len(net.arcs), 0)
    assert apply_flow_correction(FIG4B, net, zero) == FIG4B.edges


def test_worked_example_pipeline_reaches_figure_values(fig3_graph):
    from quasiflow.dagcov import build_local_dag
    ag, info = fig3_graph
    dag = build_local_dag(ag, info, (2, 4), max_dist=100, drop_zero=False)
    fixed, flow = correct_dag(dag)
    assert fixed.edges == {(2, 4): 10, (4, 5): 10, (4, 6): 0}
    assert flow.objective == 0


def test_quadratic_correction_of_raw_figure_coverages():
    # with the raw coverages (10, 10, 2) the squared-cost optimum shares the
    # surplus: (10, 9, 1) costs 4 while (10, 10, 0) costs 8
    fixed, flow = correct_dag(FIG4B)
    assert fixed.edges == {(2, 4): 10, (4, 5): 9, (4, 6): 1}
    assert flow.objective == 4 == brute_force_correction(FIG4B)[0]
    assert flow_objective(FIG4B, {(2, 4): 10, (4, 5): 10, (4, 6): 0}) == 8


def test_solver_matches_exhaustive_search():
    rng = random.Random(17)
    for _ in range(40):
        dag = random_dag(rng, max_edges=6)
        fixed, flow = correct_dag(dag)
        assert conserves(dag, fixed.edges)
        cost = flow_objective(dag, fixed.edges)
        assert cost == flow.objective
        # the solver's cost is achievable, so it is a valid incumbent
        assert brute_force_correction(dag, upper=cost)[0] == flow.objective


def test_dp_oracle_matches_plain_enumeration():
    rng = random.Random(8)
    for _ in range(25):
        dag = random_dag(rng, max_nodes=5, max_cov=4, max_edges=4)
        best, val = brute_force_correction(dag)
        assert conserves(dag, val) and flow_objective(dag, val) == best
        # any better solution moves each edge by at most sqrt(best)
        assert naive_correction(dag, math.isqrt(best)) == best


def test_conservation_after_correction():
    rng = random.Random(23)
    for _ in range(100):
        dag = random_dag(rng)
        fixed, _ = correct_dag(dag)
        for v in fixed.active_nodes():
            if fixed.predecessors(v) and fixed.successors(v):
                assert fixed.in_cov(v) == fixed.out_cov(v)


def test_empty_dag():
    dag = LocalDag((1, 2), (1, 2), {})
    fixed, flow = correct_dag(dag)
    assert fixed.edges == {} and flow.objective == 0


def test_network_dump(tmp_path):
    net = build_offset_network(FIG4B)
    write_network(net, tmp_path / "n.tsv", solve_min_cost_flow(net))
    lines = (tmp_path / "n.tsv").read_text().splitlines()
    assert sum(l.startswith("arc") for l in lines) == len(net.arcs)
    assert all("flow=" in l for l in lines if l.startswith("arc"))

"""Walk one anchor edge through the local pipeline on a six-unitig toy graph.

Two haplotypes branch at U1, merge in U4 and split again.  Reads pair U2
with U4 and U5, and U4 with U5 and U6, so the anchor U2->U4 should only
see the U5 branch.
"""

import logging

from quasiflow.dagcov import build_local_dag
from quasiflow.dbg import AssemblyGraph, Unitig
from quasiflow.decompose import decompose_flow_paths
from quasiflow.flow import build_offset_network, correct_dag
from quasiflow.pairing import PairedInfo, build_paired_with_index

logging.basicConfig(level=logging.INFO, format="%(message)s")
log = logging.getLogger("demo")

edges = {(1, 2): 10, (1, 3): 10, (2, 4): 10, (3, 4): 10, (4, 5): 10, (4, 6): 12}
unitigs = {u: Unitig(u, "A" * 20, 16, 10.0) for u in range(1, 7)}
ag = AssemblyGraph(5, unitigs, edges)
info = build_paired_with_index(PairedInfo({2: frozenset({4, 5}), 4: frozenset({5, 6})}))

dag = build_local_dag(ag, info, (2, 4), max_dist=100, drop_zero=False)
log.info("local DAG for anchor U2->U4: %s", dag.edges)

net = build_offset_network(dag)
log.info("offset network: %d nodes, %d arcs", len(net.nodes), len(net.arcs))

fixed, flow = correct_dag(dag)
log.info("corrected coverages %s (objective %s)", fixed.edges, flow.objective)

for path, weight in decompose_flow_paths(fixed, info):
    log.info("path %s carries %d", " -> ".join(f"U{u}" for u in path), weight)

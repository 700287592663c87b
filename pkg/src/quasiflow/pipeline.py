"""End-to-end assembly: reads → solid k-mers → AG → local DAGs → APAG → contigs."""

from __future__ import annotations

import logging
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path

from .dagcov import build_local_dag, readjust_coverages, write_dot
from .dbg import AssemblyGraph, build_assembly_graph, polish_assembly_graph, write_gfa
from .decompose import (Apag, WeightedPathSet, build_apag, decompose_flow_paths,
                        polish_local_paths, write_apag_gfa)
from .finalize import (ContigSet, emit_contigs, extract_haplotypes, lp_polish_abundances, merge_end_variants,
                       polish_apag, spelled_length, write_abundance_tsv, write_contigs_fasta,
                       write_summary_json)
from .flow import correct_dag
from .kspectrum import count_kmers, filter_solid, kde_threshold, write_histogram_tsv
from .pairing import PairedInfo, associate_paired_unitigs, write_pairs_tsv
from .seqio import ReadSet

logger = logging.getLogger(__name__)


@dataclass
class AssemblyConfig:
    kmer_size: int = 121
    threshold: int | None = None
    oversmooth: float = 1.0
    filigree_ratio: float = 5.0
    min_tip: int | None = None
    branch_limit: int = 10
    max_dist: int | None = None
    min_copath_support: int = 1
    min_pair_support: int = 2
    readjust_ratio: float = 0.1
    traversal_floor: float = 0.1
    forward_only: bool = False
    threads: int = 1
    min_contig_len: int = 500

    def __post_init__(self):
        if self.kmer_size < 3:
            raise ValueError(f"kmer_size must be at least 3, got {self.kmer_size}")
        if self.threads < 1 or self.branch_limit < 1:
            raise ValueError("threads and branch_limit must be positive")
        if self.oversmooth <= 0 or self.filigree_ratio < 1:
            raise ValueError("oversmooth must be positive and filigree_ratio at least 1")

    def resolved_max_dist(self, reads: ReadSet) -> int:
        if self.max_dist is not None:
            return self.max_dist
        return reads.insert_size + 2 * reads.delta


@dataclass
class AssemblyResult:
    contigs: ContigSet
    threshold: int
    ag: AssemblyGraph
    info: PairedInfo
    apag: Apag
    paths: WeightedPathSet
    anchor_paths: list = field(default_factory=list)
    timings: dict = field(default_factory=dict)

    def summary(self, config: AssemblyConfig) -> dict:
        return {
            "config": asdict(config),
            "threshold": self.threshold,
            "unitigs": len(self.ag.unitigs),
            "ag_edges": len(self.ag.edges),
            "paired_links": len(self.info.support),
            "apag_nodes": len(self.apag.nodes),
            "apag_edges": len(self.apag.edges),
            "contigs": [{"id": c.id, "length": len(c), "freq": round(c.freq, 6)}
                        for c in self.contigs],
            "timings_s": {k: round(v, 3) for k, v in self.timings.items()},
        }


# --- per-anchor work ----------------------------------------------------------

_SHARED: dict = {}


def _init_worker(ag, info, params):
    _SHARED["ag"], _SHARED["info"], _SHARED["params"] = ag, info, params


def process_anchor(ag: AssemblyGraph, info: PairedInfo, anchor, max_dist: int, branch_limit: int,
                   t_solid: int, min_copath_support: int, readjust_ratio: float,
                   traversal_floor: float) -> WeightedPathSet:
    """Local DAG → readjust → min-cost-flow correction → decomposition → polish."""
    dag = build_local_dag(ag, info, anchor, max_dist, branch_limit, min_frac=traversal_floor)
    dag = readjust_coverages(dag, readjust_ratio)
    dag, _ = correct_dag(dag)
    paths = decompose_flow_paths(dag, info)
    return polish_local_paths(paths, anchor, t_solid, info, min_copath_support, dag)


def _run_chunk(anchors):
    ag, info, p = _SHARED["ag"], _SHARED["info"], _SHARED["params"]
    return [process_anchor(ag, info, a, **p) for a in anchors]


def run_anchors(ag: AssemblyGraph, info: PairedInfo, params: dict, threads: int = 1):
    anchors = sorted(ag.edges)
    if threads <= 1 or len(anchors) < 2:
        return [process_anchor(ag, info, a, **params) for a in anchors]
    n_chunks = min(len(anchors), threads * 4)
    chunks = [anchors[i::n_chunks] for i in range(n_chunks)]
    with ProcessPoolExecutor(threads, initializer=_init_worker, initargs=(ag, info, params)) as ex:
        results = list(ex.map(_run_chunk, chunks))
    merged = {}
    for chunk, res in zip(chunks, results):
        for a, ps in zip(chunk, res):
            merged[a] = ps
    return [merged[a] for a in anchors]


# --- driver -------------------------------------------------------------------

def assemble(reads: ReadSet, config: AssemblyConfig, out_dir=None,
             dump_dag: tuple[int, int] | None = None) -> AssemblyResult:
    timings = {}
    t0 = time.perf_counter()
    k = config.kmer_size
    spectrum = count_kmers(reads, k, canonical=not config.forward_only)
    curve = None
    if config.threshold is not None:
        t = config.threshold
    else:
        curve, t = kde_threshold(spectrum, config.oversmooth)
    solid = filter_solid(spectrum, t)
    timings["kmers"] = time.perf_counter() - t0

    t1 = time.perf_counter()
    ag = build_assembly_graph(solid)
    ag = polish_assembly_graph(ag, config.min_tip, config.filigree_ratio, config.min_contig_len)
    info = associate_paired_unitigs(reads, ag, solid, config.min_pair_support)
    timings["graph"] = time.perf_counter() - t1

    t2 = time.perf_counter()
    params = dict(max_dist=config.resolved_max_dist(reads), branch_limit=config.branch_limit,
                  t_solid=t, min_copath_support=config.min_copath_support,
                  readjust_ratio=config.readjust_ratio, traversal_floor=config.traversal_floor)
    anchor_paths = run_anchors(ag, info, params, config.threads)
    timings["anchors"] = time.perf_counter() - t2

    t3 = time.perf_counter()
    apag = build_apag(ag, anchor_paths, info, config.min_contig_len)
    apag = polish_apag(apag, config.min_contig_len)
    paths = extract_haplotypes(apag, info)
    kept = WeightedPathSet()
    for p, w in paths:
        if spelled_length(apag, p) >= config.min_contig_len:
            kept.add(p, w)
    # heads and tails within one fragment span carry depressed coverage
    margin = reads.insert_size + reads.delta + reads.read_length
    kept = merge_end_variants(apag, kept, margin)
    if len(kept):
        mult = lp_polish_abundances(apag, kept, margin)
    else:
        mult = []
    contigs = emit_contigs(apag, kept, mult, config.min_contig_len,
                           dedupe_revcomp=not config.forward_only)
    timings["finalize"] = time.perf_counter() - t3
    timings["total"] = time.perf_counter() - t0

    result = AssemblyResult(contigs, t, ag, info, apag, kept, anchor_paths, timings)
    logger.info("assembled %d contigs in %.2fs", len(contigs), timings["total"])
    if out_dir is not None:
        write_outputs(result, config, out_dir, spectrum, curve, dump_dag, reads)
    return result


def write_outputs(result: AssemblyResult, config: AssemblyConfig, out_dir, spectrum=None,
                  curve=None, dump_dag=None, reads=None) -> None:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    write_contigs_fasta(result.contigs, out / "contigs.fasta")
    write_abundance_tsv(result.contigs, out / "abundances.tsv")
    write_gfa(result.ag, out / "assembly_graph.gfa")
    write_apag_gfa(result.apag, out / "apag.gfa")
    write_pairs_tsv(result.info, out / "paired_unitigs.tsv")
    if spectrum is not None:
        write_histogram_tsv(spectrum, out / "kmer_histogram.tsv", curve)
    if dump_dag is not None and reads is not None:
        if tuple(dump_dag) in result.ag.edges:
            dag = build_local_dag(result.ag, result.info, tuple(dump_dag),
                                  config.resolved_max_dist(reads), config.branch_limit,
                                  min_frac=config.traversal_floor)
            write_dot(readjust_coverages(dag, config.readjust_ratio),
                      out / f"dag_{dump_dag[0]}_{dump_dag[1]}.dot")
        else:
            logger.warning("--dump-dag %s is not an assembly-graph edge", dump_dag)
    summary = result.summary(config)
    # timings and thread count vary run to run, so only the FASTA and TSV
    # outputs are byte-reproducible
    write_summary_json(summary, out / "summary.json")

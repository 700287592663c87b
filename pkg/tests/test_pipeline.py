import json

import pytest

from quasiflow.metrics import evaluate_assembly
from quasiflow.pipeline import AssemblyConfig, assemble

from conftest import E2E_K, e2e_sample


def test_clean_sample_recovers_both_haplotypes(e2e_clean):
    sample, _, res = e2e_clean
    m = evaluate_assembly(res.contigs, sample, 0.02, both_strands=False)
    assert len(res.contigs) == 2
    assert m.genome_fraction >= 98 and m.error_rate == 0.0
    assert sorted(round(c.freq, 1) for c in res.contigs) == [0.3, 0.7]


def test_outputs_written(tmp_path):
    _, reads = e2e_sample(3, 0.0)
    cfg = AssemblyConfig(kmer_size=E2E_K, forward_only=True)
    res = assemble(reads, cfg, out_dir=tmp_path, dump_dag=next(iter(sorted(
        assemble(reads, cfg).ag.edges))))
    names = {p.name for p in tmp_path.iterdir()}
    for n in ("contigs.fasta", "abundances.tsv", "assembly_graph.gfa", "apag.gfa",
              "paired_unitigs.tsv", "kmer_histogram.tsv", "summary.json"):
        assert n in names
    assert any(n.startswith("dag_") and n.endswith(".dot") for n in names)
    summary = json.loads((tmp_path / "summary.json").read_text())
    assert summary["threshold"] == res.threshold
    rows = (tmp_path / "abundances.tsv").read_text().splitlines()
    assert len(rows) == len(res.contigs) + 1


def test_fixed_threshold_skips_kde():
    _, reads = e2e_sample(1, 0.0)
    res = assemble(reads, AssemblyConfig(kmer_size=E2E_K, forward_only=True, threshold=5))
    assert res.threshold == 5 and res.contigs


def test_config_validation():
    with pytest.raises(ValueError):
        AssemblyConfig(kmer_size=0)

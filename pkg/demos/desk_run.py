"""Simulate a two-haplotype sample, assemble it and score the contigs.

Usage: python3 demos/desk_run.py [error_rate] [seed]
"""

import logging
import sys
import tempfile

from quasiflow.metrics import evaluate_assembly
from quasiflow.pipeline import AssemblyConfig, assemble
from quasiflow.simulate import simulate_reads, simulate_sample

logging.basicConfig(level=logging.INFO, format="%(levelname)s %(name)s: %(message)s")
log = logging.getLogger("demo")

err = float(sys.argv[1]) if len(sys.argv) > 1 else 0.003
seed = int(sys.argv[2]) if len(sys.argv) > 2 else 2

sample = simulate_sample(2000, 2, 0.02, (0.3, 0.7), seed=seed)
reads = simulate_reads(sample, 200, 100, 350, 35, err, seed=seed + 1)
log.info("%d read pairs, error rate %.2f%%", len(reads), 100 * err)

# 2x100 bp reads cannot hold the default 121-mers
cfg = AssemblyConfig(kmer_size=31, forward_only=True)
with tempfile.TemporaryDirectory() as out:
    res = assemble(reads, cfg, out_dir=out)
    log.info("outputs written to %s (removed on exit)", out)

log.info("solid threshold %d, %d contigs", res.threshold, len(res.contigs))
for c in res.contigs:
    log.info("%s  %d bp  freq %.3f", c.id, len(c), c.freq)

m = evaluate_assembly(res.contigs, sample, 0.02, both_strands=False)
for key, val in m.as_dict().items():
    print(f"{key:>20}: {val}")

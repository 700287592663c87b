"""Command-line entry point: ``quasiflow assemble | simulate | eval``."""

from __future__ import annotations

import argparse
import json
import logging
import re
import sys
from dataclasses import dataclass
from pathlib import Path

from .metrics import evaluate_assembly
from .pipeline import AssemblyConfig, assemble
from .seqio import ReadFormatError, load_paired_reads, read_fastx, write_fasta, write_paired_reads
from .simulate import HaplotypeSample, simulate_reads, simulate_sample

logger = logging.getLogger("quasiflow")

_FREQ = re.compile(r"(?:^|\s)freq=([0-9.eE+-]+)")


@dataclass
class FastaRecord:
    id: str
    seq: str
    freq: float


def read_weighted_fasta(path) -> list[FastaRecord]:
    """FASTA records whose headers carry ``freq=<value>`` (missing -> equal share)."""
    recs = []
    for header, seq in read_fastx(path, full_header=True):
        m = _FREQ.search(header)
        recs.append(FastaRecord(header.split()[0] if header else "", seq.upper(),
                                float(m.group(1)) if m else float("nan")))
    if recs and all(r.freq != r.freq for r in recs):
        for r in recs:
            r.freq = 1.0 / len(recs)
    elif any(r.freq != r.freq for r in recs):
        raise ReadFormatError(f"{path}: some records lack freq= in their header")
    return recs


def load_truth(path, divergence: float = 0.0) -> HaplotypeSample:
    recs = read_weighted_fasta(path)
    if not recs:
        raise ReadFormatError(f"{path}: no haplotypes")
    total = sum(r.freq for r in recs)
    return HaplotypeSample(tuple(r.seq for r in recs), tuple(r.freq / total for r in recs),
                           divergence=divergence)


def _pair(text: str) -> tuple[int, int]:
    try:
        a, b = (int(x) for x in text.split(","))
    except ValueError:
        raise argparse.ArgumentTypeError("expected two unitig ids as A,B") from None
    return a, b


def _freqs(text: str) -> tuple[float, ...]:
    vals = tuple(float(x) for x in text.split(","))
    s = sum(vals)
    if s <= 0 or any(v <= 0 for v in vals):
        raise argparse.ArgumentTypeError("frequencies must be positive")
    return tuple(v / s for v in vals)


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="quasiflow", description=__doc__)
    ap.add_argument("-v", "--verbose", action="count", default=0)
    sub = ap.add_subparsers(dest="command", required=True)

    a = sub.add_parser("assemble", help="assemble haplotypes from paired reads")
    a.add_argument("--left", required=True)
    a.add_argument("--right", required=True)
    a.add_argument("--insert", type=int, required=True, help="distance between mate starts")
    a.add_argument("--delta", type=int, required=True, help="maximum insert deviation")
    a.add_argument("--kmer-size", type=int, default=121)
    a.add_argument("--threshold", type=int, help="solid k-mer threshold (skips KDE)")
    a.add_argument("--oversmooth", type=float, default=1.0)
    a.add_argument("--filigree-ratio", type=float, default=5.0)
    a.add_argument("--branch-limit", type=int, default=10)
    a.add_argument("--min-copath-support", type=int, default=1)
    a.add_argument("--min-contig-len", type=int, default=500)
    a.add_argument("--forward-only", action="store_true",
                   help="reads are on the forward strand; no reverse-complement merging")
    a.add_argument("--threads", type=int, default=1)
    a.add_argument("--dump-dag", type=_pair, metavar="A,B",
                   help="write the local DAG of assembly-graph edge A->B as DOT")
    a.add_argument("--out", default="quasiflow_out")

    s = sub.add_parser("simulate", help="simulate haplotypes and paired reads")
    s.add_argument("--length", type=int, default=2000)
    s.add_argument("--haplotypes", type=int, default=2)
    s.add_argument("--divergence", type=float, default=0.02)
    s.add_argument("--freqs", type=_freqs, default=(0.3, 0.7))
    s.add_argument("--coverage", type=float, default=200.0)
    s.add_argument("--read-length", type=int, default=100)
    s.add_argument("--insert", type=int, default=350)
    s.add_argument("--delta", type=int, default=35)
    s.add_argument("--error-rate", type=float, default=0.0)
    s.add_argument("--both-strands", action="store_true", help="FR library from both strands")
    s.add_argument("--seed", type=int, default=1)
    s.add_argument("--out", default="sim")

    e = sub.add_parser("eval", help="score contigs against true haplotypes")
    e.add_argument("--contigs", required=True)
    e.add_argument("--truth", required=True)
    e.add_argument("--divergence", type=float, default=0.02,
                   help="expected divergence; sets the alignment band")
    e.add_argument("--forward-only", action="store_true", help="do not try reverse strands")
    e.add_argument("--report", choices=("json", "tsv"), default="json")
    e.add_argument("--out", help="also write the report here")
    return ap


def cmd_assemble(args) -> int:
    reads = load_paired_reads(args.left, args.right, args.insert, args.delta)
    if args.kmer_size > reads.min_read_length:
        logger.error("--kmer-size %d exceeds the shortest read (%d bp)", args.kmer_size,
                     reads.min_read_length)
        return 2
    cfg = AssemblyConfig(kmer_size=args.kmer_size, threshold=args.threshold,
                         oversmooth=args.oversmooth, filigree_ratio=args.filigree_ratio,
                         branch_limit=args.branch_limit,
                         min_copath_support=args.min_copath_support,
                         forward_only=args.forward_only, threads=args.threads,
                         min_contig_len=args.min_contig_len)
    res = assemble(reads, cfg, out_dir=args.out, dump_dag=args.dump_dag)
    for c in res.contigs:
        print(f"{c.id}\t{len(c)}\t{c.freq:.6f}")
    return 0


def cmd_simulate(args) -> int:
    if len(args.freqs) != args.haplotypes:
        logger.error("--freqs lists %d values for %d haplotypes", len(args.freqs), args.haplotypes)
        return 2
    sample = simulate_sample(args.length, args.haplotypes, args.divergence, args.freqs, args.seed)
    reads = simulate_reads(sample, args.coverage, args.read_length, args.insert, args.delta,
                           args.error_rate, args.seed + 1, forward_only=not args.both_strands)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    write_paired_reads(reads, out / "reads_1.fq", out / "reads_2.fq")
    write_fasta(((f"hap{i} freq={f:.6f}", h) for i, (h, f) in
                 enumerate(zip(sample.haplotypes, sample.freqs))), out / "truth.fasta")
    meta = {k: v for k, v in vars(args).items() if k not in ("func", "command", "verbose")}
    meta["pairs"] = len(reads)
    with open(out / "simulation.json", "w") as fh:
        json.dump(meta, fh, indent=2, sort_keys=True)
        fh.write("\n")
    print(f"wrote {len(reads)} pairs and {len(sample)} haplotypes to {out}")
    return 0


def format_report(metrics: dict, fmt: str) -> str:
    if fmt == "json":
        return json.dumps(metrics, indent=2, sort_keys=True) + "\n"
    rows = ["metric\tvalue"]
    for key in sorted(metrics):
        val = metrics[key]
        if isinstance(val, list):
            val = ",".join("NA" if v is None else str(v) for v in val)
        rows.append(f"{key}\t{'NA' if val is None else val}")
    return "\n".join(rows) + "\n"


def cmd_eval(args) -> int:
    contigs = read_weighted_fasta(args.contigs)
    truth = load_truth(args.truth, args.divergence)
    m = evaluate_assembly(contigs, truth, args.divergence, both_strands=not args.forward_only)
    text = format_report(m.as_dict(), args.report)
    sys.stdout.write(text)
    if args.out:
        Path(args.out).write_text(text)
    return 0


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.WARNING - 10 * min(args.verbose, 2),
                        format="%(levelname)s %(name)s: %(message)s")
    handler = {"assemble": cmd_assemble, "simulate": cmd_simulate, "eval": cmd_eval}[args.command]
    try:
        return handler(args)
    except (OSError, ValueError) as exc:
        logger.error("%s", exc)
        return 1


if __name__ == "__main__":
    sys.exit(main())

"""Viral quasispecies assembly by paired de Bruijn graphs and min-cost flow."""

from .metrics import Metrics, evaluate_assembly, frequency_errors
from .pipeline import AssemblyConfig, AssemblyResult, assemble
from .seqio import ReadPair, ReadSet, load_paired_reads
from .simulate import HaplotypeSample, simulate_reads, simulate_sample

__version__ = "0.1.0"

__all__ = [
    "AssemblyConfig",
    "AssemblyResult",
    "HaplotypeSample",
    "Metrics",
    "ReadPair",
    "ReadSet",
    "assemble",
    "evaluate_assembly",
    "frequency_errors",
    "load_paired_reads",
    "simulate_reads",
    "simulate_sample",
]

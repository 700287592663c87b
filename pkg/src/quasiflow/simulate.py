"""Haplotype population and paired-end read simulator for desk-scale runs."""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass

import numpy as np

from .seqio import ReadPair, ReadSet, revcomp

logger = logging.getLogger(__name__)

_BASES = np.array(list("ACGT"))


@dataclass(frozen=True)
class HaplotypeSample:
    haplotypes: tuple[str, ...]
    freqs: tuple[float, ...]
    ancestor: str = ""
    divergence: float = 0.0
    seed: int | None = None

    def __post_init__(self):
        if len(self.haplotypes) != len(self.freqs):
            raise ValueError("one frequency per haplotype required")
        if any(f <= 0 for f in self.freqs) or abs(sum(self.freqs) - 1) > 1e-9:
            raise ValueError("frequencies must be positive and sum to 1")

    def __len__(self) -> int:
        return len(self.haplotypes)


def _random_seq(rng: np.random.Generator, n: int) -> str:
    return "".join(_BASES[rng.integers(0, 4, n)])


def mutate(seq: str, n_mut: int, rng: np.random.Generator) -> str:
    """Apply ``n_mut`` events at distinct positions: 90% substitutions,
    5% single-base insertions, 5% single-base deletions."""
    if n_mut == 0:
        return seq
    pos = np.sort(rng.choice(len(seq), size=n_mut, replace=False))
    kind = rng.random(n_mut)
    out = []
    prev = 0
    for p, r in zip(pos, kind):
        out.append(seq[prev:p])
        base = seq[p]
        if r < 0.90:
            alts = [b for b in "ACGT" if b != base]
            out.append(alts[rng.integers(0, 3)])
        elif r < 0.95:
            out.append(str(_BASES[rng.integers(0, 4)]) + base)
        prev = p + 1
    out.append(seq[prev:])
    return "".join(out)


def simulate_sample(ancestor_len: int, n: int, divergence: float, freqs, seed: int) -> HaplotypeSample:
    """Draw a random ancestor and derive ``n`` haplotypes from it.

    Each haplotype receives ``round(divergence * ancestor_len)`` independent
    mutation events, so two haplotypes differ by roughly twice ``divergence``.
    """
    if not 0 <= divergence < 0.2:
        raise ValueError("divergence must lie in [0, 0.2)")
    freqs = tuple(float(f) for f in freqs)
    if len(freqs) != n:
        raise ValueError("need one frequency per haplotype")
    rng = np.random.default_rng(seed)
    ancestor = _random_seq(rng, ancestor_len)
    n_mut = int(round(divergence * ancestor_len))
    haps = tuple(mutate(ancestor, n_mut, rng) for _ in range(n))
    return HaplotypeSample(haps, freqs, ancestor, divergence, seed)


def _add_errors(seq: str, rate: float, rng: np.random.Generator) -> str:
    if rate <= 0:
        return seq
    hits = np.flatnonzero(rng.random(len(seq)) < rate)
    if hits.size == 0:
        return seq
    chars = list(seq)
    shifts = rng.integers(1, 4, hits.size)
    for i, s in zip(hits, shifts):
        chars[i] = "ACGT"[("ACGT".index(chars[i]) + s) % 4] if chars[i] in "ACGT" else chars[i]
    return "".join(chars)


def simulate_reads(sample: HaplotypeSample, coverage: float, read_len: int, insert_size: int,
                   delta: int, error_rate: float, seed: int,
                   forward_only: bool = True) -> ReadSet:
    """Shotgun paired-end reads.

    ``insert_size`` is the distance between the two mate start positions and is
    drawn uniformly from ``insert_size ± delta``. With ``forward_only`` both
    mates are reported on the haplotype's forward strand; otherwise fragments
    come from either strand and the right mate is reverse-complemented (FR).
    Read ids encode ``r<i>_h<haplotype>_<start>_<gap>``.
    """
    if insert_size <= read_len:
        raise ValueError("insert size must exceed read length")
    span = insert_size + delta + read_len
    for h in sample.haplotypes:
        if len(h) < span:
            raise ValueError(f"haplotype of length {len(h)} shorter than fragment span {span}")
    rng = np.random.default_rng(seed)
    mean_len = float(np.mean([len(h) for h in sample.haplotypes]))
    n_pairs = int(math.ceil(coverage * mean_len / (2 * read_len)))
    origins = rng.choice(len(sample), size=n_pairs, p=np.asarray(sample.freqs))
    gaps = rng.integers(insert_size - delta, insert_size + delta + 1, size=n_pairs)
    pairs = []
    for i in range(n_pairs):
        h = sample.haplotypes[origins[i]]
        g = int(gaps[i])
        start = int(rng.integers(0, len(h) - g - read_len + 1))
        left = h[start:start + read_len]
        right = h[start + g:start + g + read_len]
        if not forward_only:
            if rng.random() < 0.5:
                left, right = revcomp(right), left
            else:
                right = revcomp(right)
        left = _add_errors(left, error_rate, rng)
        right = _add_errors(right, error_rate, rng)
        pairs.append(ReadPair(left, right, f"r{i}_h{origins[i]}_{start}_{g}"))
    return ReadSet(tuple(pairs), insert_size, delta)

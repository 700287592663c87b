"""Paired-unitig sets P(U) from same-offset windows of read mates."""

from __future__ import annotations

import logging
from collections import Counter
from dataclasses import dataclass, field

from .dbg import AssemblyGraph
from .kspectrum import SolidSet
from .seqio import ReadSet, revcomp

logger = logging.getLogger(__name__)


@dataclass
class PairedInfo:
    forward: dict[int, frozenset[int]]
    reverse: dict[int, frozenset[int]] = field(default_factory=dict)
    support: dict[tuple[int, int], int] = field(default_factory=dict)

    def P(self, u: int) -> frozenset[int]:
        return self.forward.get(u, frozenset())

    def paired_with(self, u: int) -> frozenset[int]:
        return self.reverse.get(u, frozenset())

    def restrict(self, keep) -> "PairedInfo":
        """Drop every unitig not in ``keep``."""
        keep = set(keep)
        sup = {(a, b): s for (a, b), s in self.support.items() if a in keep and b in keep}
        fwd = {a: frozenset(v for v in vs if v in keep) for a, vs in self.forward.items() if a in keep}
        return build_paired_with_index(PairedInfo({a: v for a, v in fwd.items() if v}, {}, sup))


def associate_paired_unitigs(reads: ReadSet, ag: AssemblyGraph, solid: SolidSet | None = None,
                             min_support: int = 2, fr_library: bool = True) -> PairedInfo:
    """Link the unitig of each left-mate window to the unitig of the right-mate
    window at the same offset.

    Only k-mers present in the (polished) assembly graph count, so ``solid``
    is implied by ``ag``; it is accepted for interface symmetry. In canonical
    mode the right mate is reverse-complemented first (FR library) and the
    strand-twin link is added as well. Links seen fewer than ``min_support``
    times are dropped.
    """
    k = ag.k
    index = ag.kmer_index()
    counts: Counter = Counter()

    def scan(left: str, right: str):
        n = min(len(left), len(right)) - k + 1
        for j in range(max(n, 0)):
            a = index.get(left[j:j + k])
            if a is None:
                continue
            b = index.get(right[j:j + k])
            if b is None or a[0] == b[0]:
                continue
            counts[(a[0], b[0])] += 1

    for pair in reads.pairs:
        if ag.canonical:
            right = revcomp(pair.right) if fr_library else pair.right
            scan(pair.left, right)
            scan(revcomp(right), revcomp(pair.left))
        else:
            scan(pair.left, pair.right)

    support = {e: c for e, c in sorted(counts.items()) if c >= min_support}
    fwd: dict[int, set[int]] = {}
    for a, b in support:
        fwd.setdefault(a, set()).add(b)
    info = PairedInfo({a: frozenset(v) for a, v in sorted(fwd.items())}, {}, support)
    logger.info("paired links: %d kept of %d observed", len(support), len(counts))
    return build_paired_with_index(info)


def build_paired_with_index(info: PairedInfo) -> PairedInfo:
    rev: dict[int, set[int]] = {}
    for a in sorted(info.forward):
        for b in info.forward[a]:
            rev.setdefault(b, set()).add(a)
    return PairedInfo(dict(info.forward), {b: frozenset(v) for b, v in sorted(rev.items())},
                      dict(info.support))


def write_pairs_tsv(info: PairedInfo, path) -> None:
    with open(path, "w") as fh:
        fh.write("left_unitig\tright_unitig\tsupport\n")
        for a in sorted(info.forward):
            for b in sorted(info.forward[a]):
                fh.write(f"{a}\t{b}\t{info.support.get((a, b), 0)}\n")

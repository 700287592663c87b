"""Assembly and frequency-estimation metrics against known haplotypes.

Contigs are placed on the haplotypes with a banded semi-global edit-distance
alignment (free reference ends). Each contig keeps a single placement, on the
haplotype it aligns to with the fewest edits per base.
"""

from __future__ import annotations

import logging
import math
from collections import Counter
from dataclasses import dataclass, field

import numpy as np

from .seqio import revcomp

logger = logging.getLogger(__name__)

SEED_K = 15
MISASSEMBLY_SHIFT = 1000
MIN_SPLIT_SEGMENT = 100
_INF = np.iinfo(np.int32).max // 4


@dataclass
class Alignment:
    ref_start: int
    ref_end: int
    mismatches: int
    insertions: int
    deletions: int
    query_len: int
    reverse: bool = False

    @property
    def edits(self) -> int:
        return self.mismatches + self.insertions + self.deletions

    @property
    def identity(self) -> float:
        span = max(self.query_len, self.ref_end - self.ref_start, 1)
        return 1.0 - self.edits / span


@dataclass
class Metrics:
    genome_fraction: float = 0.0
    n50: int = 0
    error_rate: float = 0.0
    misassembly_count: int = 0
    mee: float | None = None
    s_hat_ee: float | None = None
    identities: list[float | None] = field(default_factory=list)
    estimates: list[float | None] = field(default_factory=list)
    contig_count: int = 0
    empty: bool = False

    def __post_init__(self):
        if not 0.0 <= self.genome_fraction <= 100.0 + 1e-9:
            raise ValueError("genome fraction must lie in [0, 100]")

    def as_dict(self) -> dict:
        return {
            "genome_fraction": round(self.genome_fraction, 4),
            "n50": self.n50,
            "error_rate": round(self.error_rate, 4),
            "misassembly_count": self.misassembly_count,
            "mee": None if self.mee is None else round(self.mee, 4),
            "s_hat_ee": None if self.s_hat_ee is None else round(self.s_hat_ee, 4),
            "identities": [None if x is None else round(x, 6) for x in self.identities],
            "estimates": [None if x is None else round(x, 4) for x in self.estimates],
            "contig_count": self.contig_count,
            "empty": self.empty,
        }


# --- alignment -------------------------------------------------------------------

def _seed_diagonals(query: str, ref: str, k: int = SEED_K) -> list[tuple[int, int]]:
    """(query pos, diagonal) for k-mers occurring exactly once in ``ref``."""
    seen: Counter = Counter(ref[j:j + k] for j in range(len(ref) - k + 1))
    where = {ref[j:j + k]: j for j in range(len(ref) - k + 1) if seen[ref[j:j + k]] == 1}
    hits = []
    for i in range(len(query) - k + 1):
        j = where.get(query[i:i + k])
        if j is not None:
            hits.append((i, j - i))
    return hits


def banded_align(query: str, ref: str, band: int, offset: int = 0) -> Alignment:
    """Semi-global edit-distance alignment of all of ``query`` to part of ``ref``.

    Cells are kept within ``band`` of the diagonal j = i + offset. Rows are
    filled with numpy; the horizontal (deletion) recurrence is a running
    minimum of D - j.
    """
    n, m = len(query), len(ref)
    w = max(1, int(band))
    width = 2 * w + 1
    q = np.frombuffer(query.encode(), dtype=np.uint8)
    r = np.frombuffer(ref.encode(), dtype=np.uint8)
    rows = np.full((n + 1, width), _INF, dtype=np.int64)
    t = np.arange(width)
    cols0 = offset - w + t
    ok0 = (cols0 >= 0) & (cols0 <= m)
    rows[0, ok0] = 0
    for i in range(1, n + 1):
        cols = i + offset - w + t
        valid = (cols >= 0) & (cols <= m)
        prev = rows[i - 1]
        up = np.full(width, _INF, dtype=np.int64)
        up[:-1] = prev[1:] + 1
        diag = prev.copy()
        inner = valid & (cols >= 1)
        jj = np.clip(cols - 1, 0, max(m - 1, 0))
        mism = (r[jj] != q[i - 1]).astype(np.int64) if m else np.ones(width, dtype=np.int64)
        diag = np.where(inner, prev + mism, _INF)
        cur = np.minimum(diag, up)
        cur = np.where(cols == 0, i, cur)
        cur = np.where(valid, cur, _INF)
        # deletions: cur[t] = min_{s<=t} cur[s] + (t - s)
        cur = np.minimum.accumulate(cur - t) + t
        rows[i] = np.where(valid, np.minimum(cur, _INF), _INF)
    last = rows[n]
    t_end = int(np.argmin(last))
    if last[t_end] >= _INF:
        raise ValueError("band too narrow for any alignment")
    # traceback
    i, tt = n, t_end
    mis = ins = dele = 0
    ref_end = n + offset - w + t_end
    while i > 0:
        j = i + offset - w + tt
        d = rows[i, tt]
        if j >= 1 and tt < width:
            sub = int(ref[j - 1] != query[i - 1])
            if rows[i - 1, tt] + sub == d:
                mis += sub
                i -= 1
                continue
        if tt + 1 < width and rows[i - 1, tt + 1] + 1 == d:
            ins += 1
            i -= 1
            tt += 1
            continue
        if tt > 0 and rows[i, tt - 1] + 1 == d:
            dele += 1
            tt -= 1
            continue
        if j == 0:
            ins += i
            i = 0
            break
        raise AssertionError("traceback lost the optimal path")
    ref_start = i + offset - w + tt
    return Alignment(ref_start, ref_end, mis, ins, dele, n)


def align_contig(contig: str, ref: str, divergence: float = 0.02, both_strands: bool = True) -> Alignment | None:
    """Best placement of ``contig`` on ``ref``; None when no seed is shared."""
    best = None
    strands = [(contig, False)]
    if both_strands:
        strands.append((revcomp(contig), True))
    for seq, rev in strands:
        hits = _seed_diagonals(seq, ref)
        if not hits:
            continue
        diag, _ = Counter(d for _, d in hits).most_common(1)[0]
        band = max(32, int(2 * divergence * len(seq)))
        aln = banded_align(seq, ref, band, diag)
        aln.reverse = rev
        if best is None or aln.edits < best.edits:
            best = aln
    return best


def split_segments(contig: str, ref: str, k: int = SEED_K) -> list[tuple[int, int, int]]:
    """Collinear seed runs as (query start, query end, diagonal)."""
    hits = _seed_diagonals(contig, ref, k)
    segs: list[list[int]] = []
    for i, d in hits:
        if segs and abs(d - segs[-1][2]) <= 50 and i - segs[-1][1] <= 200:
            segs[-1][1] = i + k
        else:
            segs.append([i, i + k, d])
    return [tuple(s) for s in segs]


def is_misassembled(contig: str, ref: str) -> bool:
    """Alignment splits into >= 2 substantial segments displaced by > 1 kb."""
    for seq in (contig, revcomp(contig)):
        segs = [s for s in split_segments(seq, ref) if s[1] - s[0] >= MIN_SPLIT_SEGMENT]
        diags = [d for _, _, d in segs]
        if diags and max(diags) - min(diags) > MISASSEMBLY_SHIFT:
            return True
    return False


# --- summary statistics ---------------------------------------------------------

def n50(lengths) -> int:
    """Length L such that contigs of length >= L hold at least half the bases."""
    ls = sorted((int(x) for x in lengths), reverse=True)
    if not ls:
        return 0
    half = sum(ls) / 2.0
    acc = 0
    for L in ls:
        acc += L
        if acc >= half:
            return L
    return ls[-1]


def frequency_errors(estimated, truth) -> tuple[float, float]:
    """Mean absolute frequency error and its quasi-standard deviation.

    Both inputs are per-haplotype percentages on the same index set.
    """
    est = [float(x) for x in estimated]
    tru = [float(x) for x in truth]
    if len(est) != len(tru) or not est:
        raise ValueError("need one estimate per true haplotype")
    errs = [abs(a - b) for a, b in zip(est, tru)]
    mee = sum(errs) / len(errs)
    if len(errs) < 2:
        return mee, 0.0
    s = math.sqrt(sum((e - mee) ** 2 for e in errs) / (len(errs) - 1))
    return mee, s


def _union_length(intervals) -> int:
    total, end = 0, -1
    for a, b in sorted(intervals):
        if b <= end:
            continue
        total += b - max(a, end)
        end = b
    return total


def evaluate_assembly(contigs, truth, divergence: float | None = None,
                      both_strands: bool = True) -> Metrics:
    """Genome fraction, N50, error rate, misassemblies and frequency errors.

    ``contigs`` is any iterable of objects with ``seq`` and ``freq``; ``truth``
    exposes ``haplotypes`` and ``freqs``. Each haplotype's frequency estimate
    comes from its longest assigned contig and is only scored when N50
    exceeds 75% of the mean haplotype length.
    """
    cs = list(contigs)
    haps = list(truth.haplotypes)
    if not cs:
        return Metrics(identities=[None] * len(haps), estimates=[None] * len(haps), empty=True)
    div = truth.divergence if divergence is None else divergence
    div = max(div, 0.01)
    placed = []
    for c in cs:
        best = None
        for h, ref in enumerate(haps):
            aln = align_contig(c.seq, ref, 2 * div, both_strands)
            if aln is None:
                continue
            rate = aln.edits / max(len(c.seq), 1)
            if best is None or rate < best[0]:
                best = (rate, h, aln)
        placed.append(best)
    covered = {h: [] for h in range(len(haps))}
    edits = aligned = 0
    mis = 0
    for c, pl in zip(cs, placed):
        if pl is None:
            continue
        _, h, aln = pl
        covered[h].append((aln.ref_start, aln.ref_end))
        edits += aln.edits + c.seq.upper().count("N")
        aligned += len(c.seq)
        if is_misassembled(c.seq, haps[h]):
            mis += 1
    gf = 100.0 * sum(_union_length(iv) for iv in covered.values()) / sum(len(h) for h in haps)
    err = 100.0 * edits / aligned if aligned else 0.0
    lens = [len(c.seq) for c in cs]
    n = n50(lens)
    identities: list[float | None] = []
    estimates: list[float | None] = []
    for h in range(len(haps)):
        mine = [(c, pl[2]) for c, pl in zip(cs, placed) if pl is not None and pl[1] == h]
        if not mine:
            identities.append(None)
            estimates.append(None)
            continue
        c, aln = max(mine, key=lambda t: (len(t[0].seq), t[0].freq, -t[1].edits))
        identities.append(aln.identity)
        estimates.append(100.0 * c.freq)
    mee = s_hat = None
    mean_len = sum(len(h) for h in haps) / len(haps)
    if n > 0.75 * mean_len:
        est = [0.0 if e is None else e for e in estimates]
        mee, s_hat = frequency_errors(est, [100.0 * f for f in truth.freqs])
    return Metrics(gf, n, err, mis, mee, s_hat, identities, estimates, len(cs))

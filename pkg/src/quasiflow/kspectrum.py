"""K-mer counting, abundance density estimation and the solid-k-mer threshold."""

from __future__ import annotations

import logging
import math
import warnings
from collections import Counter
from dataclasses import dataclass, field

import numpy as np

from .seqio import ReadSet, canonical_seq, iter_kmers

logger = logging.getLogger(__name__)

FALLBACK_THRESHOLD = 2
MAX_DOUBLINGS = 10


@dataclass
class KmerSpectrum:
    k: int
    counts: dict[str, int]
    canonical: bool = True
    # (k+1)-mer counts, used as read support of graph junctions
    edge_counts: dict[str, int] = field(default_factory=dict)

    def __len__(self) -> int:
        return len(self.counts)

    def key(self, kmer: str) -> str:
        return canonical_seq(kmer) if self.canonical else kmer

    def count(self, kmer: str) -> int:
        return self.counts.get(self.key(kmer), 0)

    def edge_count(self, kp1mer: str) -> int:
        return self.edge_counts.get(self.key(kp1mer), 0)

    def histogram(self) -> dict[int, int]:
        return dict(sorted(Counter(self.counts.values()).items()))

    @property
    def total(self) -> int:
        return sum(self.counts.values())


@dataclass
class DensityCurve:
    grid: np.ndarray
    density: np.ndarray
    bandwidth: float
    degenerate: bool = False

    def local_minima(self) -> list[float]:
        return _extrema(self.grid, self.density)[0]

    def local_maxima(self) -> list[float]:
        return _extrema(self.grid, self.density)[1]


@dataclass(frozen=True)
class SolidSet:
    threshold: int
    kmers: frozenset[str]
    spectrum: KmerSpectrum | None = None

    def __len__(self) -> int:
        return len(self.kmers)

    def __contains__(self, kmer) -> bool:
        return kmer in self.kmers


def count_kmers(reads: ReadSet, k: int, canonical: bool = True,
                junctions: bool = True) -> KmerSpectrum:
    """Count k-mers over both mates of every pair.

    With ``junctions`` the (k+1)-mers are counted as well; they provide the
    read support of assembly-graph edges.
    """
    if k < 1:
        raise ValueError("k must be positive")
    if reads.pairs and k > reads.min_read_length:
        raise ValueError(f"k={k} exceeds the shortest read length {reads.min_read_length}")
    counts: Counter = Counter()
    edges: Counter = Counter()
    key = canonical_seq if canonical else None
    for pair in reads.pairs:
        for seq in (pair.left, pair.right):
            if key is None:
                counts.update(km for _, km in iter_kmers(seq, k))
                if junctions:
                    edges.update(km for _, km in iter_kmers(seq, k + 1))
            else:
                counts.update(key(km) for _, km in iter_kmers(seq, k))
                if junctions:
                    edges.update(key(km) for _, km in iter_kmers(seq, k + 1))
    return KmerSpectrum(k, dict(counts), canonical, dict(edges))


# --- density estimation ------------------------------------------------------

def silverman_bandwidth(x: np.ndarray) -> float:
    x = np.asarray(x, dtype=float)
    if x.size < 2:
        return 0.0
    std = float(np.std(x))
    q75, q25 = np.percentile(x, [75, 25])
    iqr = (q75 - q25) / 1.34
    spread = min(std, iqr) if iqr > 0 else std
    return 0.9 * spread * x.size ** (-0.2)


def gaussian_kde_curve(values, bandwidth: float, grid: np.ndarray,
                       lower: float = 1.0) -> np.ndarray:
    """Gaussian KDE of ``values`` on ``grid``, reflected at ``lower``.

    Counts cannot fall below ``lower``, so kernel mass spilling past it is
    folded back; the curve then integrates to one over ``[lower, inf)``.
    """
    values = np.asarray(values, dtype=float)
    uniq, mult = np.unique(values, return_counts=True)
    n = values.size
    out = np.zeros(grid.size)
    norm = 1.0 / (n * bandwidth * math.sqrt(2 * math.pi))
    # chunk over distinct sample values to bound memory
    for start in range(0, uniq.size, 512):
        u = uniq[start:start + 512, None]
        m = mult[start:start + 512, None]
        z1 = (grid[None, :] - u) / bandwidth
        z2 = (grid[None, :] - (2 * lower - u)) / bandwidth
        out += (m * (np.exp(-0.5 * z1 * z1) + np.exp(-0.5 * z2 * z2))).sum(axis=0)
    return out * norm


def _extrema(grid: np.ndarray, density: np.ndarray):
    """Internal minima and maxima from sign changes of the discrete derivative.

    Flat runs are skipped; an extremum sitting on a plateau is placed at the
    plateau centre. A curve that starts decreasing has its first grid point
    reported as a maximum.
    """
    d = np.diff(density)
    scale = float(np.max(np.abs(density))) if density.size else 0.0
    tol = scale * 1e-12
    s = np.where(d > tol, 1, np.where(d < -tol, -1, 0))
    idx = np.flatnonzero(s)
    minima: list[float] = []
    maxima: list[float] = []
    if idx.size == 0:
        return minima, maxima
    if s[idx[0]] < 0:
        maxima.append(float(grid[0]))
    for a, b in zip(idx[:-1], idx[1:]):
        if s[a] == s[b]:
            continue
        # plateau spans grid points a+1 .. b
        centre = 0.5 * (grid[a + 1] + grid[b])
        if s[a] < 0 < s[b]:
            minima.append(float(centre))
        else:
            maxima.append(float(centre))
    if s[idx[-1]] > 0:
        maxima.append(float(grid[-1]))
    return minima, maxima


def _minima_before_last_max(curve: DensityCurve) -> list[float]:
    minima, maxima = _extrema(curve.grid, curve.density)
    if not maxima:
        return []
    last = maxima[-1]
    return [m for m in minima if m < last]


def _valley_jumped(prev: DensityCurve, cur: DensityCurve) -> bool:
    """True when the first valley of ``cur`` lies beyond the mode that followed
    the first valley of ``prev``."""
    pmin = _minima_before_last_max(prev)
    cmin = _minima_before_last_max(cur)
    if not pmin or not cmin:
        return False
    maxima = prev.local_maxima()
    before = [m for m in maxima if m < pmin[0]]
    peak = before[-1] if before else float(prev.grid[0])
    if peak > 0.5 * pmin[0]:
        # not a low-abundance error mode followed by a clear valley
        return False
    after = [m for m in maxima if m > pmin[0]]
    return bool(after) and cmin[0] > after[0]


def kde_threshold(spectrum: KmerSpectrum, oversmooth: float = 1.0,
                  grid_quantile: float = 99.9,
                  max_error_mode: float = 0.25) -> tuple[DensityCurve, int]:
    """Pick the solid-k-mer abundance threshold from a smoothed spectrum.

    Each distinct k-mer contributes one sample at its count. The bandwidth is
    Silverman's rule (floored at one abundance unit) times ``oversmooth``, and
    is doubled until at most one internal minimum remains left of the rightmost
    maximum, unless a doubling would move the first valley past the mode that
    followed it (multimodal genomic spectra, where low-abundance haplotypes
    form their own modes); then the first valley of the last accepted curve is
    used. The threshold is the midpoint between that minimum and the
    nearest maximum to its left.

    A valley only separates erroneous from genomic k-mers when the leftmost
    mode sits at low abundance; if the leftmost maximum lies beyond
    ``max_error_mode`` times the rightmost maximum, or no valley exists, the
    spectrum is treated as degenerate and the threshold falls back to 2.
    """
    if oversmooth < 1:
        raise ValueError("oversmooth must be >= 1")
    if not spectrum.counts:
        raise ValueError("empty spectrum")
    values = np.fromiter(spectrum.counts.values(), dtype=float, count=len(spectrum.counts))
    cap = max(2, int(math.ceil(np.percentile(values, grid_quantile))))
    grid = np.arange(1, cap + 1, dtype=float)
    base = max(silverman_bandwidth(values), 1.0)

    factor = oversmooth
    curve = None
    for _ in range(MAX_DOUBLINGS + 1):
        h = base * factor
        cand = DensityCurve(grid, gaussian_kde_curve(values, h, grid), h)
        if curve is not None and _valley_jumped(curve, cand):
            # the extra smoothing swallowed a genomic mode; keep the previous curve
            break
        curve = cand
        if len(_minima_before_last_max(curve)) <= 1:
            break
        factor *= 2

    minima = _minima_before_last_max(curve)[:1]
    _, maxima = _extrema(curve.grid, curve.density)
    if len(minima) != 1:
        return _fallback(curve, "no single valley in the k-mer density")
    valley = minima[0]
    left_max = [m for m in maxima if m < valley]
    peak = left_max[-1] if left_max else float(grid[0])
    if maxima and peak > max_error_mode * maxima[-1]:
        return _fallback(curve, "leftmost density mode is not a low-abundance error mode")
    t = int(math.floor(0.5 * (valley + peak) + 0.5))
    logger.info("KDE threshold t=%d (valley %.1f, peak %.1f, h=%.2f)", t, valley, peak, curve.bandwidth)
    return curve, max(t, 1)


def _fallback(curve: DensityCurve, reason: str) -> tuple[DensityCurve, int]:
    warnings.warn(f"{reason}; falling back to threshold {FALLBACK_THRESHOLD}", RuntimeWarning)
    curve.degenerate = True
    return curve, FALLBACK_THRESHOLD


def filter_solid(spectrum: KmerSpectrum, t: int) -> SolidSet:
    if t < 1:
        raise ValueError("threshold must be >= 1")
    kmers = frozenset(km for km, c in spectrum.counts.items() if c >= t)
    return SolidSet(t, kmers, spectrum)


def write_histogram_tsv(spectrum: KmerSpectrum, path, curve: DensityCurve | None = None) -> None:
    hist = spectrum.histogram()
    dens = {}
    if curve is not None:
        dens = {int(x): y for x, y in zip(curve.grid, curve.density)}
    with open(path, "w") as fh:
        fh.write("abundance\tkmers\tdensity\n")
        for a in sorted(set(hist) | set(dens)):
            d = dens.get(a)
            fh.write(f"{a}\t{hist.get(a, 0)}\t{'' if d is None else f'{d:.6g}'}\n")

"""Paired-end read ingestion and k-mer helpers."""

from __future__ import annotations

import gzip
import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Iterator

logger = logging.getLogger(__name__)

ALPHABET = frozenset("ACGTN")
_COMPLEMENT = str.maketrans("ACGTN", "TGCAN")


class ReadFormatError(ValueError):
    """Raised on corrupt or inconsistent read files."""


def revcomp(seq: str) -> str:
    return seq.translate(_COMPLEMENT)[::-1]


@dataclass(frozen=True)
class ReadPair:
    left: str
    right: str
    id: str = ""

    def __post_init__(self):
        if not self.left or not self.right:
            raise ValueError(f"read pair {self.id!r} has an empty mate")
        if not set(self.left) <= ALPHABET or not set(self.right) <= ALPHABET:
            raise ValueError(f"read pair {self.id!r} contains characters outside ACGTN")


@dataclass(frozen=True)
class ReadSet:
    pairs: tuple[ReadPair, ...]
    insert_size: int
    delta: int
    dropped: int = 0

    def __post_init__(self):
        object.__setattr__(self, "pairs", tuple(self.pairs))
        if self.delta < 0:
            raise ValueError("insert size error must be non-negative")
        if self.pairs and self.insert_size <= self.read_length:
            raise ValueError(
                f"insert size {self.insert_size} must exceed read length {self.read_length}"
            )

    def __len__(self) -> int:
        return len(self.pairs)

    def __iter__(self):
        return iter(self.pairs)

    @property
    def read_length(self) -> int:
        if not self.pairs:
            return 0
        return max(max(len(p.left), len(p.right)) for p in self.pairs)

    @property
    def min_read_length(self) -> int:
        if not self.pairs:
            return 0
        return min(min(len(p.left), len(p.right)) for p in self.pairs)


@dataclass(frozen=True)
class Kmer:
    """A k-mer in canonical form; ``forward`` is False when the input was reverse-complemented."""

    seq: str
    forward: bool = True

    def __len__(self) -> int:
        return len(self.seq)


def canonicalize(kmer: str, k: int | None = None) -> Kmer:
    if k is not None and len(kmer) != k:
        raise ValueError(f"expected a {k}-mer, got length {len(kmer)}")
    if "N" in kmer:
        raise ValueError("k-mer contains N")
    rc = revcomp(kmer)
    if rc < kmer:
        return Kmer(rc, forward=False)
    return Kmer(kmer, forward=True)


def canonical_seq(kmer: str) -> str:
    rc = revcomp(kmer)
    return rc if rc < kmer else kmer


def iter_kmers(seq: str, k: int) -> Iterator[tuple[int, str]]:
    """Yield (offset, k-mer) for every window of ``seq`` that holds no N."""
    n = len(seq)
    if n < k:
        return
    if "N" not in seq:
        for i in range(n - k + 1):
            yield i, seq[i:i + k]
        return
    run_start = 0
    for i, ch in enumerate(seq + "N"):
        if ch == "N":
            for j in range(run_start, i - k + 1):
                yield j, seq[j:j + k]
            run_start = i + 1


# --- FASTA / FASTQ -----------------------------------------------------------

def _open_text(path: str | Path):
    path = Path(path)
    if path.suffix == ".gz":
        return gzip.open(path, "rt")
    return open(path, "rt")


def read_fastx(path: str | Path, full_header: bool = False) -> Iterator[tuple[str, str]]:
    """Stream (id, sequence) records from FASTA or FASTQ, gzip by extension.

    With ``full_header`` FASTA records keep the whole header line, not just
    its first word.
    """
    with _open_text(path) as fh:
        first = fh.readline()
        while first and not first.strip():
            first = fh.readline()
        if not first:
            return
        if first.startswith(">"):
            yield from _read_fasta(fh, first, full_header)
        elif first.startswith("@"):
            yield from _read_fastq(fh, first, path)
        else:
            raise ReadFormatError(f"{path}: not FASTA or FASTQ (starts with {first[:1]!r})")


def _fasta_name(line: str, full: bool) -> str:
    text = line[1:].strip()
    if full or not text:
        return text
    return text.split()[0]


def _read_fasta(fh, header, full_header=False):
    name = _fasta_name(header, full_header)
    chunks: list[str] = []
    for line in fh:
        line = line.strip()
        if not line:
            continue
        if line.startswith(">"):
            yield name, "".join(chunks).upper()
            name = _fasta_name(line, full_header)
            chunks = []
        else:
            chunks.append(line)
    yield name, "".join(chunks).upper()


def _read_fastq(fh, header, path):
    lineno = 1
    while header:
        if not header.startswith("@"):
            raise ReadFormatError(f"{path}:{lineno}: FASTQ header must start with '@'")
        seq = fh.readline().strip()
        plus = fh.readline()
        qual = fh.readline().strip()
        if not plus.startswith("+"):
            raise ReadFormatError(f"{path}:{lineno + 2}: missing '+' separator")
        if len(qual) != len(seq):
            raise ReadFormatError(f"{path}:{lineno + 3}: quality length differs from sequence")
        parts = header[1:].split()
        yield (parts[0] if parts else ""), seq.upper()
        lineno += 4
        header = fh.readline()
        while header and not header.strip():
            header = fh.readline()


def _strip_mate_suffix(name: str) -> str:
    if len(name) > 2 and name[-2] == "/" and name[-1] in "12":
        return name[:-2]
    return name


def load_paired_reads(left_path, right_path, insert_size: int, delta: int,
                      check_ids: bool = True) -> ReadSet:
    """Load two mate files into a :class:`ReadSet`.

    Records are matched by position. When both ids carry /1 and /2 suffixes the
    stems must agree. Records with characters outside ACGTN or empty sequences
    are dropped and counted in ``ReadSet.dropped``.
    """
    for p in (left_path, right_path):
        if not Path(p).is_file():
            raise FileNotFoundError(p)
    left = list(read_fastx(left_path))
    right = list(read_fastx(right_path))
    if len(left) != len(right):
        raise ReadFormatError(
            f"pair count mismatch: {len(left)} left records vs {len(right)} right records"
        )
    pairs = []
    dropped = 0
    for (lid, lseq), (rid, rseq) in zip(left, right):
        if check_ids and lid.endswith("/1") and rid.endswith("/2"):
            if _strip_mate_suffix(lid) != _strip_mate_suffix(rid):
                raise ReadFormatError(f"mate ids disagree: {lid} vs {rid}")
        try:
            pairs.append(ReadPair(lseq, rseq, _strip_mate_suffix(lid)))
        except ValueError:
            dropped += 1
    if dropped:
        logger.warning("dropped %d malformed read pairs", dropped)
    return ReadSet(tuple(pairs), insert_size, delta, dropped)


def write_paired_reads(reads: ReadSet, left_path, right_path, fmt: str = "fastq") -> None:
    opener = gzip.open if str(left_path).endswith(".gz") else open
    with opener(left_path, "wt") as lf, opener(right_path, "wt") as rf:
        for i, pair in enumerate(reads.pairs):
            name = pair.id or f"pair{i}"
            for fh, seq, mate in ((lf, pair.left, 1), (rf, pair.right, 2)):
                if fmt == "fastq":
                    fh.write(f"@{name}/{mate}\n{seq}\n+\n{'I' * len(seq)}\n")
                else:
                    fh.write(f">{name}/{mate}\n{seq}\n")


def write_fasta(records, path) -> None:
    """Write (header, sequence) pairs, wrapping at 80 columns."""
    with open(path, "w") as fh:
        for header, seq in records:
            fh.write(f">{header}\n")
            for i in range(0, len(seq), 80):
                fh.write(seq[i:i + 80] + "\n")

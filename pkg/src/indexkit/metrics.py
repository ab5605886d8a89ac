"""Structural statistics over an indexing system.

Four distributions (descriptors per record, records per descriptor,
broader terms per descriptor, descriptor levels) plus coverage and
co-occurrence counts.  The table types double as the carriers for
published tables read from TSV.
"""
from __future__ import annotations

from collections import Counter
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable, Mapping

import numpy as np

from . import _kernels
from .ingest import MalformedLine, iter_lines, LineStats
from .model import EmptySystem, IndexingSystem, level_array, resolve


@dataclass(frozen=True)
class Histogram:
    """Integer-keyed counts.

    ``overflow`` holds items known to lie at or above ``overflow_from``
    whose exact values are not tabulated (published tables often stop at
    a cut-off).  It contributes to ``total`` but never to fits.
    """

    bins: Mapping[int, int]
    overflow: int = 0
    overflow_from: int | None = None

    def __post_init__(self):
        clean = {int(k): int(v) for k, v in sorted(self.bins.items()) if v}
        if any(k < 0 or v < 0 for k, v in clean.items()):
            raise ValueError("histogram keys and counts must be non-negative")
        object.__setattr__(self, "bins", clean)
        if self.overflow and self.overflow_from is None:
            raise ValueError("overflow needs overflow_from")

    @property
    def total(self) -> int:
        return sum(self.bins.values()) + self.overflow

    @property
    def weighted_sum(self) -> int:
        return sum(k * v for k, v in self.bins.items())

    def to_dict(self) -> dict:
        d = {"bins": {str(k): v for k, v in self.bins.items()}, "total": self.total}
        if self.overflow:
            d["overflow"] = self.overflow
            d["overflow_from"] = self.overflow_from
        return d

    @classmethod
    def from_dict(cls, d: Mapping) -> "Histogram":
        return cls({int(k): v for k, v in d["bins"].items()}, d.get("overflow", 0), d.get("overflow_from"))


@dataclass(frozen=True)
class LevelHistogram(Histogram):
    unreachable_in_level0: int = 0

    def __post_init__(self):
        super().__post_init__()
        if self.unreachable_in_level0 > self.bins.get(0, 0):
            raise ValueError("unreachable descriptors exceed the level-0 bucket")

    def to_dict(self) -> dict:
        return {**super().to_dict(), "unreachable_in_level0": self.unreachable_in_level0}

    @classmethod
    def from_dict(cls, d: Mapping) -> "LevelHistogram":
        return cls({int(k): v for k, v in d["bins"].items()},
                   unreachable_in_level0=d.get("unreachable_in_level0", 0))


@dataclass(frozen=True)
class RankEntry:
    id: str
    label: str
    count: int


@dataclass(frozen=True)
class RankTable:
    entries: tuple[RankEntry, ...]
    truncation: int | None = None
    unused: int = 0

    def __post_init__(self):
        object.__setattr__(self, "entries", tuple(self.entries))
        counts = [e.count for e in self.entries]
        if any(a < b for a, b in zip(counts, counts[1:])):
            raise ValueError("rank table counts must be non-increasing")

    @property
    def counts(self) -> list[int]:
        return [e.count for e in self.entries]

    @classmethod
    def from_counts(cls, items: Iterable[tuple[str, int]], k: int | None = None, unused: int = 0) -> "RankTable":
        ordered = sorted(items, key=lambda t: (-t[1], t[0]))
        if k is not None:
            ordered = ordered[:k]
        return cls(tuple(RankEntry(lbl, lbl, c) for lbl, c in ordered), k, unused)

    def to_dict(self) -> dict:
        return {
            "entries": [[e.id, e.label, e.count] for e in self.entries],
            "truncation": self.truncation,
            "unused": self.unused,
        }

    @classmethod
    def from_dict(cls, d: Mapping) -> "RankTable":
        return cls(tuple(RankEntry(*e) for e in d["entries"]), d.get("truncation"), d.get("unused", 0))


@dataclass(frozen=True)
class Coverage:
    records: int
    categorized: int
    descriptors: int

    @property
    def ratio(self) -> Fraction | None:
        return Fraction(self.categorized, self.records) if self.records else None

    def to_dict(self) -> dict:
        r = self.ratio
        return {
            "records": self.records,
            "categorized": self.categorized,
            "descriptors": self.descriptors,
            "ratio": None if r is None else float(r),
        }


# -- helpers ------------------------------------------------------------------

def _assignments(system: IndexingSystem, resolve_use: bool) -> dict[str, frozenset[str]]:
    if not resolve_use:
        return {r.id: r.descriptors for r in system.records.values()}
    cache: dict[str, str] = {}

    def res(d):
        if d not in cache:
            cache[d] = resolve(system, d)
        return cache[d]

    return {r.id: frozenset(res(d) for d in r.descriptors) for r in system.records.values()}


def _use_counts(system: IndexingSystem, resolve_use: bool) -> Counter:
    c = Counter()
    for tags in _assignments(system, resolve_use).values():
        c.update(tags)
    return c


def _candidates(system: IndexingSystem, resolve_use: bool) -> list[str]:
    if resolve_use:
        return [d.id for d in system.descriptors.values() if d.preferred]
    return list(system.descriptors)


def round_percent(count: int, total: int) -> int:
    """Integer percent, rounding halves up."""
    return (200 * count + total) // (2 * total)


# -- metrics ------------------------------------------------------------------

def tags_per_record(system: IndexingSystem, resolve_use: bool = False) -> Histogram:
    if not system.records:
        raise EmptySystem("no records")
    return Histogram(Counter(len(t) for t in _assignments(system, resolve_use).values()))


def records_per_tag(system: IndexingSystem, k: int | None = None, resolve_use: bool = False) -> RankTable:
    counts = _use_counts(system, resolve_use)
    if not counts:
        raise EmptySystem("no assignments")
    ordered = sorted(counts.items(), key=lambda t: (-t[1], system.sort_key(t[0])))
    if k is not None:
        ordered = ordered[:k]
    unused = sum(1 for d in _candidates(system, resolve_use) if d not in counts)
    return RankTable(tuple(RankEntry(d, system.label(d), c) for d, c in ordered), k, unused)


def tag_size_histogram(system: IndexingSystem, resolve_use: bool = False) -> Histogram:
    counts = _use_counts(system, resolve_use)
    if not counts:
        raise EmptySystem("no assignments")
    return Histogram(Counter(counts.values()))


def unused_descriptor_count(system: IndexingSystem, resolve_use: bool = False) -> int:
    counts = _use_counts(system, resolve_use)
    return sum(1 for d in _candidates(system, resolve_use) if d not in counts)


def broader_terms_per_term(system: IndexingSystem) -> Histogram:
    if not system.descriptors:
        raise EmptySystem("no descriptors")
    return Histogram(Counter(len(system.bt_edges.get(d, ())) for d in system.descriptors))


def level_histogram(system: IndexingSystem, tops: Iterable[str] | None = None) -> LevelHistogram:
    if not system.descriptors:
        raise EmptySystem("no descriptors")
    arr = level_array(system, tops)
    unreach = int(np.sum(arr < 0))
    vals, cnts = np.unique(np.maximum(arr, 0), return_counts=True)
    return LevelHistogram(dict(zip(vals.tolist(), cnts.tolist())), unreachable_in_level0=unreach)


def coverage(system: IndexingSystem) -> Coverage:
    tagged = sum(1 for r in system.records.values() if r.descriptors)
    return Coverage(len(system.records), tagged, len(system.descriptors))


def cooccurrence_top(system: IndexingSystem, m: int, resolve_use: bool = False) -> list[tuple[tuple[str, str], int]]:
    """The ``m`` most frequent descriptor pairs sharing a record."""
    if m < 1:
        raise ValueError("m must be >= 1")
    assigned = _assignments(system, resolve_use)
    if not any(assigned.values()):
        raise EmptySystem("no assignments")
    g = system.graph
    lens = np.fromiter((len(t) for t in assigned.values()), dtype=np.int64, count=len(assigned))
    ptr = np.zeros(lens.size + 1, dtype=np.int64)
    np.cumsum(lens, out=ptr[1:])
    idx = np.fromiter((g.pos[d] for t in assigned.values() for d in t), dtype=np.int64, count=int(ptr[-1]))
    n = len(g.ids)
    codes = _kernels.pair_codes(ptr, idx, n)
    if codes.size == 0:
        return []
    uniq, cnt = np.unique(codes, return_counts=True)
    pairs = []
    for code, c in zip(uniq.tolist(), cnt.tolist()):
        a, b = g.ids[code // n], g.ids[code % n]
        if system.sort_key(b) < system.sort_key(a):
            a, b = b, a
        pairs.append(((a, b), c))
    pairs.sort(key=lambda p: (-p[1], system.sort_key(p[0][0]), system.sort_key(p[0][1])))
    return pairs[:m]


# -- percentage tables ----------------------------------------------------------

@dataclass(frozen=True)
class PercentRow:
    n: int
    count: int
    percent: int


@dataclass(frozen=True)
class PercentTable:
    rows: tuple[PercentRow, ...]
    covered: int
    total: int

    @property
    def covered_percent(self) -> int:
        return round_percent(self.covered, self.total)

    def sum_line(self) -> str:
        return f"{self.covered} of {self.total}"


def percentage_table(hist: Histogram, nmax: int = 9) -> PercentTable:
    """Rows ``n = min key .. nmax`` with integer percentages of the full total."""
    total = hist.total
    if total == 0:
        raise EmptySystem("empty histogram")
    lo = min(hist.bins) if hist.bins else 0
    rows = tuple(PercentRow(n, hist.bins.get(n, 0), round_percent(hist.bins.get(n, 0), total))
                 for n in range(lo, nmax + 1))
    return PercentTable(rows, sum(r.count for r in rows), total)


# -- published-table TSVs ---------------------------------------------------------

def read_histogram_tsv(lines, source: str = "<stream>", cls=Histogram) -> Histogram:
    """Read ``x<TAB>count`` rows; an ``>=K`` key marks an untabulated overflow bucket."""
    bins: dict[int, int] = {}
    overflow, overflow_from = 0, None
    stats = LineStats()
    for no, text in iter_lines(lines, source, stats):
        parts = text.split("\t")
        if len(parts) < 2:
            raise MalformedLine("expected x<TAB>count", no, source)
        key, val = parts[0].strip(), parts[1].strip()
        try:
            count = int(val)
            if key.startswith(">="):
                overflow, overflow_from = count, int(key[2:])
            else:
                k = int(key)
                if k in bins:
                    raise MalformedLine(f"duplicate key {k}", no, source)
                bins[k] = count
        except ValueError:
            raise MalformedLine(f"non-integer field in {text!r}", no, source) from None
    if cls is LevelHistogram:
        return LevelHistogram(bins)
    return cls(bins, overflow, overflow_from)


def read_rank_tsv(lines, source: str = "<stream>") -> list[tuple[float, int, str]]:
    """Read ``rank<TAB>count[<TAB>label]`` rows in file order."""
    out = []
    stats = LineStats()
    for no, text in iter_lines(lines, source, stats):
        parts = text.split("\t")
        if len(parts) < 2:
            raise MalformedLine("expected rank<TAB>count", no, source)
        try:
            x, c = float(parts[0]), int(parts[1])
        except ValueError:
            raise MalformedLine(f"non-numeric field in {text!r}", no, source) from None
        label = parts[2].strip() if len(parts) > 2 and parts[2].strip() else f"#{parts[0].strip()}"
        out.append((x, c, label))
    return out


def rank_table_from_rows(rows: list[tuple[float, int, str]], k: int | None = None) -> RankTable:
    return RankTable.from_counts([(lbl, c) for _, c, lbl in rows], k)


def read_xy_tsv(lines, source: str = "<stream>") -> list[tuple[float, float]]:
    out = []
    stats = LineStats()
    for no, text in iter_lines(lines, source, stats):
        parts = text.split("\t")
        if len(parts) < 2:
            raise MalformedLine("expected x<TAB>y", no, source)
        try:
            out.append((float(parts[0]), float(parts[1])))
        except ValueError:
            raise MalformedLine(f"non-numeric field in {text!r}", no, source) from None
    return out


TABLE_FILES = {
    "tags_per_record.tsv": "tags_per_record",
    "tag_sizes.tsv": "tag_sizes",
    "broader_terms.tsv": "broader_terms",
    "levels.tsv": "levels",
    "ranks.tsv": "records_per_tag",
}


def read_table_bundle(directory) -> dict[str, object]:
    """Load whichever published-table files a bundle directory holds."""
    from pathlib import Path

    from .ingest import read_lines

    directory = Path(directory)
    out: dict[str, object] = {}
    for fname, key in TABLE_FILES.items():
        p = directory / fname
        if not p.is_file():
            continue
        if key == "records_per_tag":
            out[key] = rank_table_from_rows(read_rank_tsv(read_lines(p), str(p)))
        elif key == "levels":
            out[key] = read_histogram_tsv(read_lines(p), str(p), cls=LevelHistogram)
        else:
            out[key] = read_histogram_tsv(read_lines(p), str(p))
    return out

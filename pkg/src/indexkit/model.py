"""Normalized data model for subject-indexing systems.

Descriptors, records and the three thesaurus relations (BT/NT, RT, USE)
live in one immutable :class:`IndexingSystem`.  Graph operations work on a
compact integer index built lazily from the id-keyed mappings.
"""
from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field
from fractions import Fraction
from functools import cached_property
from typing import Iterable, Mapping

import numpy as np

from . import _kernels

MAX_USE_HOPS = 16
VIRTUAL_ROOT_ID = "__virtual_root__"
VIRTUAL_ROOT_LABEL = "Virtual top term"


class ModelError(Exception):
    pass


class UnknownDescriptor(ModelError, KeyError):
    def __init__(self, descriptor):
        super().__init__(descriptor)
        self.descriptor = descriptor

    def __str__(self):
        return f"unknown descriptor: {self.descriptor!r}"


class EquivalenceCycle(ModelError):
    pass


class Unreachable(ModelError):
    pass


class EmptySystem(ModelError):
    pass


class InvariantViolation(ModelError, ValueError):
    pass


@dataclass(frozen=True)
class Descriptor:
    id: str
    label: str
    preferred: bool = True
    use_target: str | None = None
    implicit: bool = False

    def __post_init__(self):
        if not self.label.strip():
            raise InvariantViolation(f"descriptor {self.id!r} has an empty label")
        if self.preferred == (self.use_target is not None):
            raise InvariantViolation(
                f"descriptor {self.id!r}: use_target must be set exactly when preferred is false"
            )


@dataclass(frozen=True)
class Record:
    id: str
    label: str
    descriptors: frozenset[str] = frozenset()


@dataclass
class ValidationReport:
    dangling_reference_count: int = 0
    bt_cycle_descriptor_count: int = 0
    unreachable_descriptor_count: int = 0
    uncategorized_record_count: int = 0
    warnings: dict[str, int] = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "dangling_reference_count": self.dangling_reference_count,
            "bt_cycle_descriptor_count": self.bt_cycle_descriptor_count,
            "unreachable_descriptor_count": self.unreachable_descriptor_count,
            "uncategorized_record_count": self.uncategorized_record_count,
            "warnings": dict(sorted(self.warnings.items())),
        }

    @classmethod
    def from_dict(cls, d: Mapping) -> "ValidationReport":
        return cls(**{**d, "warnings": dict(d.get("warnings", {}))})


@dataclass(frozen=True)
class _Graph:
    ids: list[str]
    pos: dict[str, int]
    up_ptr: np.ndarray  # child -> parents (BT)
    up_idx: np.ndarray
    down_ptr: np.ndarray  # parent -> children (NT)
    down_idx: np.ndarray


def _csr(n: int, src: np.ndarray, dst: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    order = np.lexsort((dst, src))
    counts = np.bincount(src, minlength=n)
    ptr = np.zeros(n + 1, dtype=np.int64)
    np.cumsum(counts, out=ptr[1:])
    return ptr, dst[order].astype(np.int64)


@dataclass(frozen=True)
class IndexingSystem:
    """Records, descriptors and typed relations of one indexing system.

    ``bt_edges`` maps a descriptor to its broader terms.  ``rt_edges`` holds
    unordered pairs as sorted 2-tuples.  USE links are carried on the
    descriptors themselves (``use_target``).  Construction checks every
    model invariant; instances are never mutated afterwards.
    """

    name: str
    descriptors: Mapping[str, Descriptor]
    records: Mapping[str, Record] = field(default_factory=dict)
    bt_edges: Mapping[str, frozenset[str]] = field(default_factory=dict)
    rt_edges: frozenset[tuple[str, str]] = frozenset()
    top_terms: frozenset[str] = frozenset()
    virtual_root: bool = False

    def __post_init__(self):
        ds = self.descriptors
        for child, parents in self.bt_edges.items():
            if child not in ds:
                raise InvariantViolation(f"BT edge from unknown descriptor {child!r}")
            if child in parents:
                raise InvariantViolation(f"BT self-loop on {child!r}")
            for p in parents:
                if p not in ds:
                    raise InvariantViolation(f"BT edge {child!r} -> unknown {p!r}")
        for a, b in self.rt_edges:
            if a not in ds or b not in ds or not a < b:
                raise InvariantViolation(f"bad RT pair {(a, b)!r}")
        for d in ds.values():
            if d.use_target is not None and d.use_target not in ds:
                raise InvariantViolation(f"{d.id!r} USE unknown {d.use_target!r}")
        for r in self.records.values():
            for d in r.descriptors:
                if d not in ds:
                    raise InvariantViolation(f"record {r.id!r} references unknown {d!r}")
        for t in self.top_terms:
            if t not in ds:
                raise InvariantViolation(f"unknown top term {t!r}")

    # -- sizes ------------------------------------------------------------

    @property
    def bt_edge_count(self) -> int:
        return sum(len(p) for p in self.bt_edges.values())

    @property
    def use_link_count(self) -> int:
        return sum(1 for d in self.descriptors.values() if d.use_target is not None)

    @property
    def assignment_count(self) -> int:
        return sum(len(r.descriptors) for r in self.records.values())

    def label(self, d: str) -> str:
        return self.descriptors[d].label

    def sort_key(self, d: str) -> tuple[str, str]:
        return (self.descriptors[d].label, d)

    def require(self, d: str) -> None:
        if d not in self.descriptors:
            raise UnknownDescriptor(d)

    # -- integer index ------------------------------------------------------

    @cached_property
    def graph(self) -> _Graph:
        ids = sorted(self.descriptors)
        pos = {d: i for i, d in enumerate(ids)}
        src, dst = [], []
        for child, parents in self.bt_edges.items():
            c = pos[child]
            for p in parents:
                src.append(c)
                dst.append(pos[p])
        src = np.asarray(src, dtype=np.int64)
        dst = np.asarray(dst, dtype=np.int64)
        up_ptr, up_idx = _csr(len(ids), src, dst)
        down_ptr, down_idx = _csr(len(ids), dst, src)
        return _Graph(ids, pos, up_ptr, up_idx, down_ptr, down_idx)

    @cached_property
    def _narrower(self) -> dict[str, frozenset[str]]:
        out: dict[str, set[str]] = {}
        for child, parents in self.bt_edges.items():
            for p in parents:
                out.setdefault(p, set()).add(child)
        return {k: frozenset(v) for k, v in out.items()}

    def effective_tops(self) -> frozenset[str]:
        """Declared top terms, or every descriptor without a broader term."""
        if self.top_terms:
            return self.top_terms
        return frozenset(d for d in self.descriptors if not self.bt_edges.get(d))


# -- operations -------------------------------------------------------------

def broader(system: IndexingSystem, d: str) -> frozenset[str]:
    system.require(d)
    return frozenset(system.bt_edges.get(d, ()))


def narrower(system: IndexingSystem, d: str) -> frozenset[str]:
    system.require(d)
    return system._narrower.get(d, frozenset())


def resolve(system: IndexingSystem, d: str) -> str:
    """Follow USE links from ``d`` to its preferred descriptor."""
    system.require(d)
    seen = {d}
    cur = d
    for _ in range(MAX_USE_HOPS + 1):
        target = system.descriptors[cur].use_target
        if target is None:
            return cur
        if target in seen:
            raise EquivalenceCycle(f"USE chain from {d!r} revisits {target!r}")
        seen.add(target)
        cur = target
    raise EquivalenceCycle(f"USE chain from {d!r} exceeds {MAX_USE_HOPS} hops")


def ancestors(system: IndexingSystem, d: str) -> frozenset[str]:
    system.require(d)
    g = system.graph
    hits = _kernels.reach(g.up_ptr, g.up_idx, g.pos[d])
    return frozenset(g.ids[i] for i in hits)


def _tops_index(system: IndexingSystem, tops: Iterable[str] | None) -> np.ndarray:
    tops = system.effective_tops() if tops is None else set(tops)
    for t in tops:
        system.require(t)
    pos = system.graph.pos
    return np.array(sorted(pos[t] for t in tops), dtype=np.int64)


def level_array(system: IndexingSystem, tops: Iterable[str] | None = None) -> np.ndarray:
    """Levels indexed like ``system.graph.ids``; -1 marks unreachable descriptors."""
    g = system.graph
    src = _tops_index(system, tops)
    if src.size == 0 and g.ids:
        raise ValueError("levels need at least one top term")
    return _kernels.bfs_levels(g.down_ptr, g.down_idx, src, len(g.ids))


def levels(system: IndexingSystem, tops: Iterable[str] | None = None) -> dict[str, int]:
    """Minimal BT-path length from each descriptor to the nearest top.

    Descriptors with no path to any top get level 0; use
    :func:`unreachable` to tell them apart from the tops themselves.
    """
    arr = level_array(system, tops)
    return {d: max(int(v), 0) for d, v in zip(system.graph.ids, arr)}


def unreachable(system: IndexingSystem, tops: Iterable[str] | None = None) -> frozenset[str]:
    arr = level_array(system, tops)
    ids = system.graph.ids
    return frozenset(ids[i] for i in np.flatnonzero(arr < 0))


def shortest_path_to_top(system: IndexingSystem, d: str, tops: Iterable[str] | None = None) -> list[str]:
    """One minimal BT path ``[d, ..., top]``.

    Among equally short paths the one whose label sequence sorts first wins.
    """
    system.require(d)
    tops = set(system.effective_tops() if tops is None else tops)
    if not tops:
        raise ValueError("tops must be non-empty")
    for t in tops:
        system.require(t)
    region = set(ancestors(system, d)) | {d}
    # distance-to-top inside the ancestor region equals the global one
    dist: dict[str, int] = {}
    queue = deque()
    for t in sorted(tops & region):
        dist[t] = 0
        queue.append(t)
    while queue:
        v = queue.popleft()
        for c in system._narrower.get(v, ()):
            if c in region and c not in dist:
                dist[c] = dist[v] + 1
                queue.append(c)
    if d not in dist:
        raise Unreachable(f"no broader-term path from {d!r} to a top term")
    path = [d]
    cur = d
    while dist[cur] > 0:
        cands = [p for p in system.bt_edges.get(cur, ()) if dist.get(p) == dist[cur] - 1]
        cur = min(cands, key=system.sort_key)
        path.append(cur)
    return path


def relations_per_descriptor(system: IndexingSystem) -> Fraction:
    n = len(system.descriptors)
    if n == 0:
        raise EmptySystem("no descriptors")
    return Fraction(system.bt_edge_count + len(system.rt_edges) + system.use_link_count, n)


def validate(system: IndexingSystem, tops: Iterable[str] | None = None) -> ValidationReport:
    """Full-scan structural audit.  Reports problems, never rejects."""
    ds = system.descriptors
    dangling = 0
    for child, parents in system.bt_edges.items():
        dangling += (child not in ds) + sum(p not in ds for p in parents)
    for a, b in system.rt_edges:
        dangling += (a not in ds) + (b not in ds)
    dangling += sum(1 for d in ds.values() if d.use_target is not None and d.use_target not in ds)
    dangling += sum(1 for r in system.records.values() for d in r.descriptors if d not in ds)

    g = system.graph
    n = len(g.ids)
    cyc = 0
    if n:
        labels = _kernels.scc_labels(g.up_ptr, g.up_idx, n)
        sizes = np.bincount(labels)
        cyc = int(np.sum(sizes[labels] >= 2))
    unreach = 0
    if n:
        tops = system.effective_tops() if tops is None else tops
        if tops:
            unreach = int(np.sum(level_array(system, tops) < 0))
        else:
            unreach = n
    uncategorized = sum(1 for r in system.records.values() if not r.descriptors)
    return ValidationReport(dangling, cyc, unreach, uncategorized)

"""Line-oriented TSV parsers and the system builder.

Every input family is a UTF-8 TSV stream.  Parsers accept any iterable of
``str`` or ``bytes`` lines (a file object works), skip blank lines and
``#`` comments, and raise :class:`MalformedLine` with the 1-based line
number on structural errors.  :func:`build_system` merges any mix of
parsed fragments into one :class:`~indexkit.model.IndexingSystem`.
"""
from __future__ import annotations

import hashlib
import re
from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Iterator

from .model import (
    VIRTUAL_ROOT_ID,
    VIRTUAL_ROOT_LABEL,
    Descriptor,
    IndexingSystem,
    Record,
    ValidationReport,
    validate,
)

DEFAULT_NAMESPACES = frozenset({
    "Category", "Discussion", "Talk", "User", "User talk", "Wikipedia",
    "Image", "File", "Template", "Help", "Portal", "MediaWiki",
})
CATEGORY = "Category"

_WS = re.compile(r"\s+")


class IngestError(Exception):
    def __init__(self, message: str, line: int | None = None, source: str = "<stream>"):
        super().__init__(message)
        self.message = message
        self.line = line
        self.source = source

    def __str__(self):
        where = self.source if self.line is None else f"{self.source}:{self.line}"
        return f"{where}: {self.message}"


class MalformedLine(IngestError):
    pass


class EncodingError(IngestError):
    pass


class EmptyTitle(IngestError):
    pass


class MultipleParents(IngestError):
    def __init__(self, notation: str, line: int | None = None, source: str = "<stream>"):
        super().__init__(f"class {notation!r} listed with more than one parent", line, source)
        self.notation = notation


class UnknownParent(IngestError):
    def __init__(self, notation: str, source: str = "<stream>"):
        super().__init__(f"parent {notation!r} is never defined", None, source)
        self.notation = notation


def normalize_label(s: str) -> str:
    s = s.strip()
    if "  " in s or not s.isprintable():  # fast path for already-clean labels
        s = _WS.sub(" ", s)
    return s


@dataclass
class LineStats:
    read: int = 0
    parsed: int = 0
    skipped: int = 0
    malformed: int = 0


def iter_lines(lines: Iterable[str | bytes], source: str = "<stream>",
               stats: LineStats | None = None) -> Iterator[tuple[int, str]]:
    """Yield ``(line_number, text)`` for content lines, decoding bytes strictly."""
    stats = stats if stats is not None else LineStats()
    for no, raw in enumerate(lines, 1):
        stats.read += 1
        if isinstance(raw, bytes):
            try:
                raw = raw.decode("utf-8")
            except UnicodeDecodeError as e:
                stats.malformed += 1
                raise EncodingError(f"invalid UTF-8 ({e.reason})", no, source) from None
        text = raw.rstrip("\n").rstrip("\r")
        if not text.strip() or text.lstrip().startswith("#"):
            stats.skipped += 1
            continue
        yield no, text


def _fields(text: str, n: int, no: int, source: str, stats: LineStats,
            optional_last: bool = False) -> list[str]:
    parts = text.split("\t")
    if optional_last and len(parts) == n - 1:
        parts.append("")
    if len(parts) != n:
        stats.malformed += 1
        raise MalformedLine(f"expected {n} tab-separated fields, got {len(parts)}", no, source)
    parts = [normalize_label(p) for p in parts]
    required = parts[:-1] if optional_last else parts
    if not all(required):
        stats.malformed += 1
        raise MalformedLine("empty field", no, source)
    return parts


# -- wiki titles --------------------------------------------------------------

@dataclass(frozen=True)
class WikiTitle:
    namespace: str
    rest: str

    def __str__(self):
        return f"{self.namespace}:{self.rest}" if self.namespace else self.rest


def _canon_namespace(prefix: str) -> str:
    prefix = normalize_label(prefix)
    return prefix[:1].upper() + prefix[1:]


def parse_wiki_title(raw: str, namespaces: Iterable[str] = DEFAULT_NAMESPACES) -> WikiTitle:
    s = raw.strip()
    if s.startswith("[[") and s.endswith("]]"):
        s = s[2:-2].strip()
    if not s:
        raise EmptyTitle(f"empty page title {raw!r}")
    if ":" in s:
        prefix, rest = s.split(":", 1)
        ns = _canon_namespace(prefix)
        if ns in set(namespaces):
            rest = normalize_label(rest)
            if not rest:
                raise EmptyTitle(f"title {raw!r} has a namespace but no name")
            return WikiTitle(ns, rest)
    return WikiTitle("", normalize_label(s))


# -- fragments ----------------------------------------------------------------

@dataclass(frozen=True)
class AssignmentLine:
    record_label: str
    descriptor_label: str
    source_line: int


def parse_assignments(lines, source: str = "<stream>", stats: LineStats | None = None) -> list[AssignmentLine]:
    stats = stats if stats is not None else LineStats()
    out = []
    for no, text in iter_lines(lines, source, stats):
        rec, desc = _fields(text, 2, no, source, stats)
        out.append(AssignmentLine(rec, desc, no))
        stats.parsed += 1
    return out


@dataclass
class WikiFragment:
    """Page/category links: record assignments plus category-to-category BT edges."""
    assignments: list[tuple[str, str]] = field(default_factory=list)
    bt: list[tuple[str, str]] = field(default_factory=list)
    declared: set[str] = field(default_factory=set)
    warnings: Counter = field(default_factory=Counter)


def parse_pagecats(lines, namespaces: Iterable[str] = DEFAULT_NAMESPACES, main_only: bool = False,
                   source: str = "<stream>", stats: LineStats | None = None) -> WikiFragment:
    stats = stats if stats is not None else LineStats()
    namespaces = frozenset(namespaces) | {CATEGORY}
    frag = WikiFragment()
    for no, text in iter_lines(lines, source, stats):
        page, cat = _fields(text, 2, no, source, stats)
        title = parse_wiki_title(page, namespaces)
        if title.namespace == CATEGORY:
            frag.declared.add(title.rest)
            if title.rest == cat:
                frag.warnings["bt_self_loop"] += 1
            else:
                frag.bt.append((title.rest, cat))
        elif main_only and title.namespace:
            frag.warnings["skipped_non_main_page"] += 1
            frag.declared.add(cat)  # category still exists
        else:
            frag.assignments.append((str(title), cat))
        stats.parsed += 1
    return frag


@dataclass
class RedirectFragment:
    links: list[tuple[str, str]] = field(default_factory=list)
    ignored: int = 0
    warnings: Counter = field(default_factory=Counter)


def parse_redirects(lines, namespaces: Iterable[str] = DEFAULT_NAMESPACES,
                    source: str = "<stream>", stats: LineStats | None = None) -> RedirectFragment:
    stats = stats if stats is not None else LineStats()
    namespaces = frozenset(namespaces) | {CATEGORY}
    frag = RedirectFragment()
    for no, text in iter_lines(lines, source, stats):
        a, b = _fields(text, 2, no, source, stats)
        ta, tb = parse_wiki_title(a, namespaces), parse_wiki_title(b, namespaces)
        stats.parsed += 1
        if ta.namespace != CATEGORY or tb.namespace != CATEGORY:
            frag.ignored += 1
        elif ta.rest == tb.rest:
            frag.warnings["use_self_loop"] += 1
        else:
            frag.links.append((ta.rest, tb.rest))
    return frag


@dataclass(frozen=True)
class ClassLine:
    notation: str
    caption: str
    parent_notation: str | None


@dataclass
class ClassScheme:
    lines: list[ClassLine]
    duplicates: int = 0


def read_classes(lines, source: str = "<stream>", stats: LineStats | None = None) -> ClassScheme:
    """Read ``notation<TAB>caption<TAB>parent`` lines, checking the tree property."""
    stats = stats if stats is not None else LineStats()
    seen: dict[str, ClassLine] = {}
    dup = 0
    for no, text in iter_lines(lines, source, stats):
        notation, caption, parent = _fields(text, 3, no, source, stats, optional_last=True)
        cl = ClassLine(notation, caption, parent or None)
        prev = seen.get(notation)
        if prev is not None:
            if prev.parent_notation != cl.parent_notation:
                raise MultipleParents(notation, no, source)
            dup += 1
        else:
            seen[notation] = cl
        stats.parsed += 1
    for cl in seen.values():
        if cl.parent_notation is not None and cl.parent_notation not in seen:
            raise UnknownParent(cl.parent_notation, source)
    return ClassScheme(list(seen.values()), dup)


def parse_classification(lines, name: str = "", virtual_root: bool = False,
                         source: str = "<stream>") -> IndexingSystem:
    system, _ = build_system(read_classes(lines, source), name=name, virtual_root=virtual_root)
    return system


@dataclass
class RelationFragment:
    """``subject<TAB>BT|RT|USE<TAB>object`` lines (the terminology interchange format)."""
    triples: list[tuple[str, str, str]] = field(default_factory=list)


RELATIONS = ("BT", "NT", "RT", "USE", "UF")


def parse_relations(lines, source: str = "<stream>", stats: LineStats | None = None) -> RelationFragment:
    stats = stats if stats is not None else LineStats()
    frag = RelationFragment()
    for no, text in iter_lines(lines, source, stats):
        s, rel, o = _fields(text, 3, no, source, stats)
        rel = rel.upper()
        if rel not in RELATIONS:
            stats.malformed += 1
            raise MalformedLine(f"unknown relation {rel!r}", no, source)
        # inverse spellings fold onto the stored direction
        if rel == "NT":
            s, rel, o = o, "BT", s
        elif rel == "UF":
            s, rel, o = o, "USE", s
        frag.triples.append((s, rel, o))
        stats.parsed += 1
    return frag


@dataclass
class DescriptorList:
    entries: list[tuple[str, str]] = field(default_factory=list)


def parse_descriptor_list(lines, source: str = "<stream>", stats: LineStats | None = None) -> DescriptorList:
    stats = stats if stats is not None else LineStats()
    out = DescriptorList()
    for no, text in iter_lines(lines, source, stats):
        did, label = _fields(text, 2, no, source, stats, optional_last=True)
        out.entries.append((did, label or did))
        stats.parsed += 1
    return out


@dataclass
class RecordList:
    entries: list[tuple[str, str]] = field(default_factory=list)


def parse_record_list(lines, source: str = "<stream>", stats: LineStats | None = None) -> RecordList:
    stats = stats if stats is not None else LineStats()
    out = RecordList()
    for no, text in iter_lines(lines, source, stats):
        rid, label = _fields(text, 2, no, source, stats, optional_last=True)
        out.entries.append((rid, label or rid))
        stats.parsed += 1
    return out


@dataclass
class BundleMeta:
    name: str = ""
    top_terms: list[str] = field(default_factory=list)
    virtual_root: bool = False
    main_namespace_only: bool = False


_BOOL = {"true": True, "false": False, "1": True, "0": False, "yes": True, "no": False}


def parse_meta(lines, source: str = "<stream>") -> BundleMeta:
    meta = BundleMeta()
    stats = LineStats()
    for no, text in iter_lines(lines, source, stats):
        key, value = _fields(text, 2, no, source, stats)
        key = key.lower()
        if key == "name":
            meta.name = value
        elif key == "top_term":
            meta.top_terms.append(value)
        elif key in ("virtual_root", "main_namespace_only"):
            if value.lower() not in _BOOL:
                raise MalformedLine(f"{key} must be true or false", no, source)
            setattr(meta, key, _BOOL[value.lower()])
        else:
            raise MalformedLine(f"unknown meta key {key!r}", no, source)
    return meta


# -- builder ------------------------------------------------------------------

class _Builder:
    def __init__(self):
        self.labels: dict[str, str] = {}
        self.declared: set[str] = set()
        self.use: dict[str, str] = {}
        self.bt: dict[str, set[str]] = {}
        self.rt: set[tuple[str, str]] = set()
        self.records: dict[str, set[str]] = {}
        self.record_labels: dict[str, str] = {}
        self.warnings: Counter = Counter()
        self.dangling = 0

    def descriptor(self, did: str, label: str | None = None, declared: bool = False):
        if declared:
            self.declared.add(did)
        if label is not None and label != did:
            old = self.labels.get(did)
            if old is not None and old != label:
                self.warnings["label_conflict"] += 1
                label = min(old, label)
            self.labels[did] = label
        else:
            self.labels.setdefault(did, did)

    def record(self, rid: str, label: str | None = None):
        self.records.setdefault(rid, set())
        self.record_labels.setdefault(rid, label or rid)

    def assign(self, rid: str, did: str):
        self.record(rid)
        self.descriptor(did)
        tags = self.records[rid]
        if did in tags:
            self.warnings["duplicate_assignment"] += 1
        tags.add(did)

    def add_bt(self, child: str, parent: str):
        self.descriptor(child)
        self.descriptor(parent)
        if child == parent:
            self.warnings["bt_self_loop"] += 1
            return
        ps = self.bt.setdefault(child, set())
        if parent in ps:
            self.warnings["duplicate_bt"] += 1
        ps.add(parent)

    def add_rt(self, a: str, b: str):
        self.descriptor(a)
        self.descriptor(b)
        if a == b:
            self.warnings["rt_self_loop"] += 1
            return
        self.rt.add((min(a, b), max(a, b)))

    def add_use(self, src: str, dst: str):
        self.descriptor(src)
        self.descriptor(dst)
        if src == dst:
            self.warnings["use_self_loop"] += 1
            return
        old = self.use.get(src)
        if old is not None and old != dst:
            self.warnings["use_conflict"] += 1
            dst = min(old, dst)
        self.use[src] = dst

    def feed(self, frag):
        if isinstance(frag, ClassScheme):
            self.warnings["duplicate_class_line"] += frag.duplicates
            for cl in frag.lines:
                self.descriptor(cl.notation, cl.caption, declared=True)
            for cl in frag.lines:
                if cl.parent_notation is not None:
                    self.add_bt(cl.notation, cl.parent_notation)
        elif isinstance(frag, WikiFragment):
            self.warnings.update(frag.warnings)
            for d in sorted(frag.declared):
                self.descriptor(d, declared=True)
            for child, parent in frag.bt:
                self.add_bt(child, parent)
            for rid, did in frag.assignments:
                self.assign(rid, did)
        elif isinstance(frag, RedirectFragment):
            self.warnings.update(frag.warnings)
            self.warnings["redirect_ignored"] += frag.ignored
            for a, b in frag.links:
                self.add_use(a, b)
        elif isinstance(frag, RelationFragment):
            for s, rel, o in frag.triples:
                {"BT": self.add_bt, "RT": self.add_rt, "USE": self.add_use}[rel](s, o)
        elif isinstance(frag, DescriptorList):
            for did, label in frag.entries:
                self.descriptor(did, label, declared=True)
        elif isinstance(frag, RecordList):
            for rid, label in frag.entries:
                self.record(rid, label)
        elif isinstance(frag, list):
            for a in frag:
                if not isinstance(a, AssignmentLine):
                    raise TypeError(f"unsupported fragment item {type(a).__name__}")
                self.assign(a.record_label, a.descriptor_label)
        else:
            raise TypeError(f"unsupported fragment {type(frag).__name__}")


def build_system(*fragments, name: str = "", top_terms: Iterable[str] = (),
                 virtual_root: bool = False) -> tuple[IndexingSystem, ValidationReport]:
    """Merge parsed fragments into one system and audit it.

    Duplicate assignments and edges collapse (counted in the report's
    warnings); self-loops are dropped; unknown top terms are dropped and
    counted as dangling references.
    """
    b = _Builder()
    for frag in fragments:
        b.feed(frag)

    tops = set()
    for t in top_terms:
        t = normalize_label(t)
        if t in b.labels:
            tops.add(t)
        else:
            b.dangling += 1
            b.warnings["unknown_top_term"] += 1

    if virtual_root and b.labels:
        roots = [d for d in b.labels if not b.bt.get(d) and d not in b.use]
        b.descriptor(VIRTUAL_ROOT_ID, VIRTUAL_ROOT_LABEL, declared=True)
        for r in roots:
            b.bt.setdefault(r, set()).add(VIRTUAL_ROOT_ID)
        tops = {VIRTUAL_ROOT_ID}

    descriptors = {
        d: Descriptor(
            id=d,
            label=b.labels[d],
            preferred=d not in b.use,
            use_target=b.use.get(d),
            implicit=d not in b.declared,
        )
        for d in b.labels
    }
    records = {
        r: Record(r, b.record_labels[r], frozenset(tags)) for r, tags in b.records.items()
    }
    system = IndexingSystem(
        name=name,
        descriptors=descriptors,
        records=records,
        bt_edges={c: frozenset(ps) for c, ps in b.bt.items() if ps},
        rt_edges=frozenset(b.rt),
        top_terms=frozenset(tops),
        virtual_root=bool(virtual_root and b.labels),
    )
    report = validate(system)
    report.dangling_reference_count += b.dangling
    report.warnings = {k: v for k, v in sorted(b.warnings.items()) if v}
    return system, report


# -- bundles ------------------------------------------------------------------

SYSTEM_FILES = ("classes.tsv", "descriptors.tsv", "pagecats.tsv", "assignments.tsv",
                "relations.tsv", "redirects.tsv", "records.tsv")


def read_lines(path: Path) -> Iterator[bytes]:
    with open(path, "rb") as fh:
        yield from fh


def file_digest(path: Path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def bundle_digests(directory: Path) -> dict[str, str]:
    directory = Path(directory)
    return {p.name: file_digest(p) for p in sorted(directory.glob("*.tsv"))}


def has_system_files(directory: Path) -> bool:
    return any((Path(directory) / f).is_file() for f in SYSTEM_FILES)


def load_meta(directory: Path) -> BundleMeta:
    p = Path(directory) / "meta.tsv"
    return parse_meta(read_lines(p), str(p)) if p.is_file() else BundleMeta()


def load_bundle(directory: Path, *, top_terms: Iterable[str] | None = None,
                virtual_root: bool | None = None, main_only: bool | None = None,
                namespaces: Iterable[str] = DEFAULT_NAMESPACES) -> tuple[IndexingSystem, ValidationReport]:
    """Parse every system file present in a bundle directory and build the system.

    Keyword arguments override the corresponding ``meta.tsv`` entries.
    """
    directory = Path(directory)
    if not directory.is_dir():
        raise FileNotFoundError(directory)
    meta = load_meta(directory)
    main_only = meta.main_namespace_only if main_only is None else main_only
    frags = []
    for fname in SYSTEM_FILES:
        p = directory / fname
        if not p.is_file():
            continue
        lines, src = read_lines(p), str(p)
        if fname == "classes.tsv":
            frags.append(read_classes(lines, src))
        elif fname == "descriptors.tsv":
            frags.append(parse_descriptor_list(lines, src))
        elif fname == "pagecats.tsv":
            frags.append(parse_pagecats(lines, namespaces, main_only, src))
        elif fname == "assignments.tsv":
            frags.append(parse_assignments(lines, src))
        elif fname == "relations.tsv":
            frags.append(parse_relations(lines, src))
        elif fname == "redirects.tsv":
            frags.append(parse_redirects(lines, namespaces, src))
        elif fname == "records.tsv":
            frags.append(parse_record_list(lines, src))
    tops = meta.top_terms if top_terms is None else list(top_terms)
    vroot = meta.virtual_root if virtual_root is None else virtual_root
    return build_system(*frags, name=meta.name or directory.name, top_terms=tops, virtual_root=vroot)

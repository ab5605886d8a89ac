"""System classification, the analysis report, and exports.

``classify`` is purely structural: no hierarchy means flat tagging, a
forest (at most one broader term everywhere, acyclic) means a
classification, anything else is a thesaurus.  Fit results ride along in
the report as evidence but never change the verdict.
"""
from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Mapping

import numpy as np

from . import __version__, _kernels
from .distfit import (
    KS_CAVEAT,
    ExponentialFit,
    FitError,
    NormalFit,
    PowerLawFit,
    fit_exponential,
    fit_normal,
    fit_power_law_points,
    fit_power_law_ranks,
    fit_power_law_tail,
)
from .metrics import (
    Coverage,
    Histogram,
    LevelHistogram,
    RankTable,
    broader_terms_per_term,
    cooccurrence_top,
    coverage,
    level_histogram,
    percentage_table,
    records_per_tag,
    tag_size_histogram,
    tags_per_record,
)
from .model import (
    EmptySystem,
    IndexingSystem,
    ValidationReport,
    ancestors,
    relations_per_descriptor,
)

CLASSIFICATION = "Classification"
FLAT_TAGGING = "FlatTagging"
THESAURUS = "Thesaurus"
KINDS = (CLASSIFICATION, FLAT_TAGGING, THESAURUS)


class MissingTable(KeyError):
    pass


@dataclass(frozen=True)
class SystemKind:
    kind: str
    has_hierarchy: bool
    is_forest: bool
    single_parent_everywhere: bool
    acyclic: bool

    def to_dict(self) -> dict:
        return dict(self.__dict__)

    @classmethod
    def from_dict(cls, d: Mapping) -> "SystemKind":
        return cls(**d)


def classify(system: IndexingSystem) -> SystemKind:
    if not system.descriptors:
        raise EmptySystem("no descriptors")
    has_hierarchy = any(system.bt_edges.values())
    single = all(len(p) <= 1 for p in system.bt_edges.values())
    g = system.graph
    labels = _kernels.scc_labels(g.up_ptr, g.up_idx, len(g.ids))
    acyclic = bool(labels.size == 0 or np.bincount(labels).max() < 2)
    forest = single and acyclic
    if not has_hierarchy:
        kind = FLAT_TAGGING
    elif forest:
        kind = CLASSIFICATION
    else:
        kind = THESAURUS
    return SystemKind(kind, has_hierarchy, forest, single, acyclic)


# -- report -----------------------------------------------------------------------

@dataclass
class AnalysisConfig:
    tops: list[str] | None = None
    resolve_use: bool = False
    exclude_level0: bool = True
    tags_range: tuple[int, int] = (1, 9)
    bt_range: tuple[int, int] = (1, 9)
    rank_k: int = 25
    tail_min: int = 10
    tail_floor: int = 5
    cooccurrence_m: int = 10
    percent_nmax: int = 9

    def to_dict(self) -> dict:
        return {
            "tops": None if self.tops is None else sorted(self.tops),
            "resolve_use": self.resolve_use,
            "exclude_level0": self.exclude_level0,
            "tags_range": list(self.tags_range),
            "bt_range": list(self.bt_range),
            "rank_k": self.rank_k,
            "tail_min": self.tail_min,
            "tail_floor": self.tail_floor,
            "cooccurrence_m": self.cooccurrence_m,
            "percent_nmax": self.percent_nmax,
        }


_TABLE_TYPES = {
    "tags_per_record": Histogram,
    "records_per_tag": RankTable,
    "tag_sizes": Histogram,
    "broader_terms": Histogram,
    "levels": LevelHistogram,
}
_FIT_TYPES = {
    "tags_exponential": ExponentialFit,
    "tags_tail": PowerLawFit,
    "broader_terms_exponential": ExponentialFit,
    "broader_terms_tail": PowerLawFit,
    "records_per_tag_powerlaw": PowerLawFit,
    "tag_sizes_powerlaw": PowerLawFit,
    "levels_normal": NormalFit,
}


@dataclass
class SystemReport:
    name: str
    config: dict
    tool_version: str = __version__
    inputs: dict[str, str] = field(default_factory=dict)
    kind: SystemKind | None = None
    validation: ValidationReport | None = None
    coverage: Coverage | None = None
    relations_per_descriptor: float | None = None
    unused_descriptors: int | None = None
    tables: dict = field(default_factory=dict)
    fits: dict = field(default_factory=dict)
    fit_errors: dict[str, str] = field(default_factory=dict)
    cooccurrence: list = field(default_factory=list)
    notes: list[str] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "tool_version": self.tool_version,
            "inputs": dict(sorted(self.inputs.items())),
            "config": self.config,
            "kind": None if self.kind is None else self.kind.to_dict(),
            "validation": None if self.validation is None else self.validation.to_dict(),
            "coverage": None if self.coverage is None else self.coverage.to_dict(),
            "relations_per_descriptor": self.relations_per_descriptor,
            "unused_descriptors": self.unused_descriptors,
            "tables": {k: v.to_dict() for k, v in sorted(self.tables.items())},
            "fits": {k: v.to_dict() for k, v in sorted(self.fits.items())},
            "fit_errors": dict(sorted(self.fit_errors.items())),
            "cooccurrence": [[a, b, c] for (a, b), c in self.cooccurrence],
            "notes": list(self.notes),
        }

    @classmethod
    def from_dict(cls, d: Mapping) -> "SystemReport":
        cov = d.get("coverage")
        return cls(
            name=d["name"],
            config=d["config"],
            tool_version=d["tool_version"],
            inputs=dict(d.get("inputs", {})),
            kind=None if d.get("kind") is None else SystemKind.from_dict(d["kind"]),
            validation=None if d.get("validation") is None else ValidationReport.from_dict(d["validation"]),
            coverage=None if cov is None else Coverage(cov["records"], cov["categorized"], cov["descriptors"]),
            relations_per_descriptor=d.get("relations_per_descriptor"),
            unused_descriptors=d.get("unused_descriptors"),
            tables={k: _TABLE_TYPES[k].from_dict(v) for k, v in d.get("tables", {}).items()},
            fits={k: _FIT_TYPES[k].from_dict(v) for k, v in d.get("fits", {}).items()},
            fit_errors=dict(d.get("fit_errors", {})),
            cooccurrence=[((a, b), c) for a, b, c in d.get("cooccurrence", [])],
            notes=list(d.get("notes", [])),
        )


def _try_fit(report: SystemReport, key: str, fn, *args):
    try:
        report.fits[key] = fn(*args)
    except FitError as e:
        report.fit_errors[key] = f"{type(e).__name__}: {e}"


def _fit_tables(report: SystemReport, cfg: AnalysisConfig) -> None:
    t = report.tables
    if "tags_per_record" in t:
        _try_fit(report, "tags_exponential", fit_exponential, t["tags_per_record"], *cfg.tags_range)
        _try_fit(report, "tags_tail", fit_power_law_tail, t["tags_per_record"], cfg.tail_min, cfg.tail_floor)
    if "broader_terms" in t and any(k > 0 for k in t["broader_terms"].bins):
        _try_fit(report, "broader_terms_exponential", fit_exponential, t["broader_terms"], *cfg.bt_range)
        _try_fit(report, "broader_terms_tail", fit_power_law_tail, t["broader_terms"], cfg.tail_min, cfg.tail_floor)
    if "records_per_tag" in t:
        _try_fit(report, "records_per_tag_powerlaw", fit_power_law_ranks, t["records_per_tag"], cfg.rank_k)
    if "tag_sizes" in t:
        h = t["tag_sizes"]
        pts = [(k, v) for k, v in h.bins.items() if v >= cfg.tail_floor]
        _try_fit(report, "tag_sizes_powerlaw", fit_power_law_points, [k for k, _ in pts], [v for _, v in pts])
    if "levels" in t:
        _try_fit(report, "levels_normal", fit_normal, t["levels"], cfg.exclude_level0)
    if "levels_normal" in report.fits:
        report.notes.append(KS_CAVEAT)


def build_report(system: IndexingSystem, cfg: AnalysisConfig | None = None,
                 inputs: Mapping[str, str] | None = None,
                 validation: ValidationReport | None = None) -> SystemReport:
    """Compute every metric, fit and the typology verdict for one system."""
    from .model import validate

    cfg = cfg or AnalysisConfig()
    report = SystemReport(system.name, cfg.to_dict(), inputs=dict(inputs or {}))
    report.validation = validation if validation is not None else validate(system, cfg.tops)
    report.coverage = coverage(system)
    if system.descriptors:
        report.kind = classify(system)
        report.relations_per_descriptor = float(relations_per_descriptor(system))
        report.tables["broader_terms"] = broader_terms_per_term(system)
        report.tables["levels"] = level_histogram(system, cfg.tops)
    if system.records:
        report.tables["tags_per_record"] = tags_per_record(system, cfg.resolve_use)
    try:
        rt = records_per_tag(system, None, cfg.resolve_use)
    except EmptySystem:
        pass
    else:
        report.unused_descriptors = rt.unused
        report.tables["records_per_tag"] = RankTable(rt.entries[: cfg.rank_k], cfg.rank_k, rt.unused)
        report.tables["tag_sizes"] = tag_size_histogram(system, cfg.resolve_use)
        report.cooccurrence = cooccurrence_top(system, cfg.cooccurrence_m, cfg.resolve_use)
    _fit_tables(report, cfg)
    return report


def report_from_tables(name: str, tables: Mapping[str, object], cfg: AnalysisConfig | None = None,
                       inputs: Mapping[str, str] | None = None) -> SystemReport:
    """Report over published tables alone (no system, so no structural verdict)."""
    cfg = cfg or AnalysisConfig()
    report = SystemReport(name, cfg.to_dict(), inputs=dict(inputs or {}))
    for k, v in tables.items():
        if k not in _TABLE_TYPES:
            raise KeyError(f"unknown table {k!r}")
        report.tables[k] = v
    _fit_tables(report, cfg)
    return report


# -- rendering --------------------------------------------------------------------

def _g(x: float | None) -> str:
    if x is None:
        return "n/a"
    return f"{x:.4g}"


_PROFILE = (
    ("tags per record", "1*", "exponential, power-law tail", "exponential, power-law tail"),
    ("broader terms per term", "1 (tree)", "0 (no hierarchy)", "exponential"),
    ("levels", "normal", "1 (no hierarchy)", "normal"),
    ("records per tag", "power law", "power law", "power law"),
)


def _observed(report: SystemReport) -> list[str]:
    f = report.fits
    out = []
    e = f.get("tags_exponential")
    out.append(f"lambda={_g(e.lambda_)} on n={e.support[0]}..{e.support[1]}" if e else "-")
    bt = report.tables.get("broader_terms")
    e = f.get("broader_terms_exponential")
    if e:
        out.append(f"lambda={_g(e.lambda_)} on b={e.support[0]}..{e.support[1]}")
    elif bt is not None:
        keys = sorted(bt.bins)
        out.append(f"values {keys[0]}..{keys[-1]}")
    else:
        out.append("-")
    n = f.get("levels_normal")
    lv = report.tables.get("levels")
    if n:
        out.append(f"mean={_g(n.mean)} sigma={_g(n.sigma)}")
    elif lv is not None:
        out.append(f"{len(lv.bins)} level(s)")
    else:
        out.append("-")
    p = f.get("records_per_tag_powerlaw")
    out.append(f"exponent={_g(p.exponent)} over ranks 1..{int(p.support[1])}" if p else "-")
    return out


def _render_text(r: SystemReport) -> str:
    w = []
    w.append(f"Indexing system report: {r.name}")
    w.append(f"tool version: {r.tool_version}")
    w.append("")
    w.append("Configuration")
    for k, v in sorted(r.config.items()):
        w.append(f"  {k}: {json.dumps(v)}")
    if r.inputs:
        w.append("Inputs (sha256)")
        for k, v in sorted(r.inputs.items()):
            w.append(f"  {k}: {v}")
    w.append("")
    verdict = r.kind.kind if r.kind else "undetermined (no structure, tables only)"
    w.append(f"Verdict: {verdict}")
    if r.kind:
        w.append(f"  has_hierarchy={r.kind.has_hierarchy} single_parent_everywhere={r.kind.single_parent_everywhere}"
                 f" acyclic={r.kind.acyclic} is_forest={r.kind.is_forest}")
    w.append("")
    w.append("Structural profile")
    cols = ("", CLASSIFICATION, FLAT_TAGGING, THESAURUS, "this system")
    rows = [cols] + [row + (obs,) for row, obs in zip(_PROFILE, _observed(r))]
    widths = [max(len(row[i]) for row in rows) for i in range(4)]
    for row in rows:
        w.append("  " + "  ".join(row[i].ljust(widths[i]) for i in range(4)) + "  | " + row[4])
    w.append("  * a classification may also assign more than one class")
    w.append("")
    if r.coverage is not None:
        c = r.coverage
        ratio = "undefined" if c.ratio is None else f"{float(c.ratio) * 100:.1f}%"
        w.append(f"Coverage: {c.categorized} of {c.records} records have a descriptor ({ratio}); "
                 f"{c.descriptors} descriptors")
    if r.relations_per_descriptor is not None:
        w.append(f"Relations per descriptor: {_g(r.relations_per_descriptor)}")
    if r.unused_descriptors is not None:
        w.append(f"Unused descriptors: {r.unused_descriptors}")
    if r.validation is not None:
        v = r.validation
        w.append(f"Validation: dangling={v.dangling_reference_count} bt_cycle_descriptors={v.bt_cycle_descriptor_count}"
                 f" unreachable={v.unreachable_descriptor_count} uncategorized_records={v.uncategorized_record_count}")
        for k, n in sorted(v.warnings.items()):
            w.append(f"  warning {k}: {n}")
    w.append("")

    h = r.tables.get("tags_per_record")
    if h is not None:
        pt = percentage_table(h, r.config.get("percent_nmax", 9))
        w.append("Descriptors per record")
        w.append(f"  {'n':>4}  {'records':>10}  percent")
        for row in pt.rows:
            w.append(f"  {row.n:>4}  {row.count:>10}  {row.percent}%")
        w.append(f"  sum   {pt.sum_line()}  {pt.covered_percent}%")
        w.append("")
    t = r.tables.get("records_per_tag")
    if t is not None:
        w.append(f"Most used descriptors (top {len(t.entries)})")
        for i, e in enumerate(t.entries, 1):
            w.append(f"  {i:>4}  {e.count:>10}  {e.label}")
        w.append("")
    for key, title in (("broader_terms", "Broader terms per descriptor"), ("levels", "Descriptor levels"),
                       ("tag_sizes", "Descriptors by number of records")):
        h = r.tables.get(key)
        if h is None:
            continue
        w.append(title)
        for k, v in h.bins.items():
            w.append(f"  {k:>4}  {v:>10}")
        if h.overflow:
            w.append(f"  >={h.overflow_from}  {h.overflow:>10}")
        if isinstance(h, LevelHistogram) and h.unreachable_in_level0:
            w.append(f"  (level 0 includes {h.unreachable_in_level0} descriptors without a path to a top term)")
        w.append("")
    w.append("Fits")
    for key, fit in sorted(r.fits.items()):
        if isinstance(fit, ExponentialFit):
            w.append(f"  {key}: lambda={_g(fit.lambda_)} intercept={_g(fit.intercept)} r2={_g(fit.r_squared)}"
                     f" support={fit.support[0]}..{fit.support[1]} bins={fit.bins_used}")
        elif isinstance(fit, PowerLawFit):
            w.append(f"  {key}: exponent={_g(fit.exponent)} intercept={_g(fit.intercept)} r2={_g(fit.r_squared)}"
                     f" support={_g(fit.support[0])}..{_g(fit.support[1])} bins={fit.bins_used}")
        elif isinstance(fit, NormalFit):
            w.append(f"  {key}: mean={_g(fit.mean)} sigma={_g(fit.sigma)} n={fit.n} ks_D={_g(fit.ks_statistic)}"
                     f" ks_p={_g(fit.ks_p)} excluded_level0={fit.excluded_level0}")
    for key, err in sorted(r.fit_errors.items()):
        w.append(f"  {key}: not fitted ({err})")
    if r.cooccurrence:
        w.append("")
        w.append("Top co-occurring descriptor pairs")
        for (a, b), c in r.cooccurrence:
            w.append(f"  {c:>8}  {a} + {b}")
    if r.notes:
        w.append("")
        w.append("Notes")
        for n in r.notes:
            w.append(f"  - {n}")
    return "\n".join(w) + "\n"


def _csv_section(buf: io.StringIO, name: str, header: list[str], rows: Iterable[list]) -> None:
    buf.write(f"# {name}\n")
    wr = csv.writer(buf, lineterminator="\n")
    wr.writerow(header)
    wr.writerows(rows)
    buf.write("\n")


def _render_csv(r: SystemReport) -> str:
    buf = io.StringIO()
    _csv_section(buf, "summary", ["key", "value"], [
        ["name", r.name],
        ["kind", r.kind.kind if r.kind else ""],
        ["relations_per_descriptor", _g(r.relations_per_descriptor)],
        ["records", r.coverage.records if r.coverage else ""],
        ["categorized_records", r.coverage.categorized if r.coverage else ""],
        ["descriptors", r.coverage.descriptors if r.coverage else ""],
    ])
    h = r.tables.get("tags_per_record")
    if h is not None:
        pt = percentage_table(h, r.config.get("percent_nmax", 9))
        _csv_section(buf, "tags_per_record", ["n", "count", "percent"],
                     [[x.n, x.count, x.percent] for x in pt.rows] + [["sum", pt.sum_line(), pt.covered_percent]])
    t = r.tables.get("records_per_tag")
    if t is not None:
        _csv_section(buf, "records_per_tag", ["rank", "label", "count"],
                     [[i, e.label, e.count] for i, e in enumerate(t.entries, 1)])
    for key in ("broader_terms", "levels", "tag_sizes"):
        h = r.tables.get(key)
        if h is not None:
            _csv_section(buf, key, ["value", "count"], [[k, v] for k, v in h.bins.items()])
    rows = []
    for key, fit in sorted(r.fits.items()):
        for pk, pv in fit.to_dict().items():
            if isinstance(pv, float):
                pv = _g(pv)
            elif isinstance(pv, list):
                pv = "..".join(_g(x) if isinstance(x, float) else str(x) for x in pv)
            rows.append([key, pk, pv])
    _csv_section(buf, "fits", ["fit", "parameter", "value"], rows)
    return buf.getvalue()


def render_report(report: SystemReport, fmt: str = "text") -> bytes:
    """Deterministic serialization: ``text``, ``json`` or ``csv``.

    Text and CSV print fit parameters with 4 significant digits; JSON keeps
    full precision so it parses back into an equal report.
    """
    if fmt == "text":
        out = _render_text(report)
    elif fmt == "json":
        out = json.dumps(report.to_dict(), indent=2, sort_keys=True, ensure_ascii=False) + "\n"
    elif fmt == "csv":
        out = _render_csv(report)
    else:
        raise ValueError(f"unknown format {fmt!r}")
    return out.encode("utf-8")


def parse_report_json(data: bytes | str) -> SystemReport:
    return SystemReport.from_dict(json.loads(data))


# -- plot series --------------------------------------------------------------------

_PLOT_FAMILIES = {
    "tags_exponential": "tags_per_record",
    "broader_terms_exponential": "broader_terms",
    "records_per_tag_powerlaw": "records_per_tag",
    "levels_normal": "levels",
}


def emit_plot_data(report: SystemReport, families: Iterable[str] | None = None) -> dict[str, str]:
    """CSV series (observed plus fitted) for each fitted distribution."""
    wanted = list(families) if families is not None else [
        f for f, t in _PLOT_FAMILIES.items() if f in report.fits and t in report.tables]
    if not wanted:
        raise MissingTable("report has no fitted table to plot")
    out = {}
    for fam in wanted:
        table = report.tables.get(_PLOT_FAMILIES.get(fam, ""))
        fit = report.fits.get(fam)
        if table is None or fit is None:
            raise MissingTable(fam)
        buf = io.StringIO()
        wr = csv.writer(buf, lineterminator="\n")
        if isinstance(fit, ExponentialFit):
            wr.writerow(["n", "count", "fitted"])
            for n, c in table.bins.items():
                if n >= 1:
                    wr.writerow([n, c, repr(fit.predict(n))])
        elif isinstance(fit, PowerLawFit):
            wr.writerow(["rank", "count", "fitted"])
            for i, c in enumerate(table.counts, 1):
                wr.writerow([i, c, repr(fit.predict(i))])
        else:
            wr.writerow(["level", "count", "fitted"])
            for lv, c in table.bins.items():
                z = (lv - fit.mean) / fit.sigma
                dens = math.exp(-0.5 * z * z) / (fit.sigma * math.sqrt(2 * math.pi))
                wr.writerow([lv, c, repr(dens * fit.n)])
        out[f"{fam}.csv"] = buf.getvalue()
    return out


# -- exports ------------------------------------------------------------------------

def _dot_id(s: str) -> str:
    return '"' + s.replace("\\", "\\\\").replace('"', '\\"') + '"'


def export_ancestor_graph(system: IndexingSystem, d: str) -> str:
    """DOT digraph of ``d`` and its ancestors, BT edges pointing child -> parent."""
    nodes = set(ancestors(system, d)) | {d}
    ordered = sorted(nodes, key=system.sort_key)
    lines = [f"digraph {_dot_id('ancestors of ' + system.label(d))} {{", "  rankdir=BT;"]
    for n in ordered:
        lbl = system.label(n)
        attr = "" if lbl == n else f" [label={_dot_id(lbl)}]"
        lines.append(f"  {_dot_id(n)}{attr};")
    for n in ordered:
        for p in sorted(system.bt_edges.get(n, ()), key=system.sort_key):
            if p in nodes:
                lines.append(f"  {_dot_id(n)} -> {_dot_id(p)};")
    lines.append("}")
    return "\n".join(lines) + "\n"


def export_terminology(system: IndexingSystem) -> tuple[str, str]:
    """``relations.tsv`` (subject, BT|RT|USE, object) and ``descriptors.tsv`` texts."""
    rel = []
    for child, parents in system.bt_edges.items():
        rel.extend(f"{child}\tBT\t{p}" for p in parents)
    rel.extend(f"{a}\tRT\t{b}" for a, b in system.rt_edges)
    rel.extend(f"{d.id}\tUSE\t{d.use_target}" for d in system.descriptors.values() if d.use_target)
    rel.sort()
    desc = sorted(f"{d.id}\t{d.label}" for d in system.descriptors.values())
    return "".join(x + "\n" for x in rel), "".join(x + "\n" for x in desc)


def write_bundle(system: IndexingSystem, directory: Path) -> list[Path]:
    """Write a re-ingestable bundle (terminology plus records and assignments)."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    rel, desc = export_terminology(system)
    meta = [f"name\t{system.name}"] if system.name else []
    meta += [f"top_term\t{t}" for t in sorted(system.top_terms)]
    meta.append("virtual_root\tfalse")
    assign = sorted(f"{r.id}\t{d}" for r in system.records.values() for d in r.descriptors)
    recs = sorted(f"{r.id}\t{r.label}" for r in system.records.values())
    files = {
        "meta.tsv": "".join(x + "\n" for x in meta),
        "relations.tsv": rel,
        "descriptors.tsv": desc,
        "assignments.tsv": "".join(x + "\n" for x in assign),
        "records.tsv": "".join(x + "\n" for x in recs),
    }
    written = []
    for name, text in files.items():
        p = directory / name
        p.write_bytes(text.encode("utf-8"))
        written.append(p)
    return written

"""``indexkit`` command line: analyze, fit, synth, path, export.

Exit codes: 0 success, 1 parse/fit/lookup failure, 2 usage error.
"""
from __future__ import annotations

import argparse
import sys
from pathlib import Path

from . import __version__
from .distfit import (FitError, fit_exponential, fit_growth, fit_normal, fit_power_law_points,
                      fit_power_law_tail)
from .ingest import IngestError, bundle_digests, has_system_files, load_bundle, load_meta, read_lines
from .metrics import LevelHistogram, percentage_table, read_histogram_tsv, read_table_bundle, read_xy_tsv
from .model import ModelError, resolve, shortest_path_to_top
from .synthgen import GenSpec, SpecInvalid, generate_growth_series, write_generated
from .typology import (AnalysisConfig, MissingTable, build_report, emit_plot_data, export_ancestor_graph,
                       render_report, report_from_tables, write_bundle)

FORMATS = {"text": "report.txt", "json": "report.json", "csv": "report.csv"}


class _Failure(Exception):
    """Expected runtime failure, reported on stderr with exit code 1."""


def _range(s: str) -> tuple[int, int]:
    try:
        lo, hi = (int(x) for x in s.split(","))
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected MIN,MAX, got {s!r}") from None
    if lo > hi:
        raise argparse.ArgumentTypeError("MIN must not exceed MAX")
    return lo, hi


def _formats(s: str) -> list[str]:
    out = [f.strip() for f in s.split(",") if f.strip()]
    bad = [f for f in out if f not in FORMATS]
    if bad or not out:
        raise argparse.ArgumentTypeError(f"formats are {', '.join(FORMATS)}")
    return out


def _bundle_dir(parser: argparse.ArgumentParser, path: str) -> Path:
    p = Path(path)
    if not p.is_dir():
        parser.error(f"bundle directory not found: {path}")
    return p


def _load(args) -> tuple:
    return load_bundle(args.bundle, top_terms=args.top_term or None,
                       virtual_root=args.virtual_root, main_only=args.main_only)


def _write(path: Path, data: bytes | str) -> None:
    path.write_bytes(data.encode("utf-8") if isinstance(data, str) else data)


def _validation_text(report) -> str:
    v = report.validation
    if v is None:
        return "no system files in bundle; structural validation not applicable\n"
    lines = [f"{k}\t{val}" for k, val in v.to_dict().items() if k != "warnings"]
    lines += [f"warning:{k}\t{n}" for k, n in sorted(v.warnings.items())]
    return "\n".join(lines) + "\n"


# -- commands ------------------------------------------------------------------

def cmd_analyze(args) -> int:
    cfg = AnalysisConfig(tops=args.top_term or None, resolve_use=args.resolve_use,
                         exclude_level0=not args.include_level0, tags_range=args.tags_range,
                         bt_range=args.bt_range, rank_k=args.rank_k, tail_min=args.tail_min,
                         tail_floor=args.tail_floor, cooccurrence_m=args.cooccurrence)
    inputs = bundle_digests(args.bundle)
    if has_system_files(args.bundle):
        system, validation = _load(args)
        report = build_report(system, cfg, inputs, validation)
    else:
        tables = read_table_bundle(args.bundle)
        if not tables:
            raise _Failure(f"{args.bundle}: no system or table files")
        name = load_meta(args.bundle).name or Path(args.bundle).name
        report = report_from_tables(name, tables, cfg, inputs)
    out = Path(args.output)
    out.mkdir(parents=True, exist_ok=True)
    for fmt in args.format:
        _write(out / FORMATS[fmt], render_report(report, fmt))
    _write(out / "validation.txt", _validation_text(report))
    try:
        plots = emit_plot_data(report)
    except MissingTable:
        plots = {}
    for fname, text in plots.items():
        _write(out / f"plot_{fname}", text)
    if report.kind is not None:
        print(f"{report.name}: {report.kind.kind}")
    else:
        print(f"{report.name}: tables only")
    return 0


def _fit_lines(args) -> list[str]:
    src = str(args.table)
    lines = read_lines(args.table)
    fam = args.family
    if fam == "exponential":
        hist = read_histogram_tsv(lines, src)
        lo = 1 if args.min is None else int(args.min)
        hi = 9 if args.max is None else int(args.max)
        f = fit_exponential(hist, lo, hi)
        out = [f"lambda\t{f.lambda_:.4g}", f"intercept\t{f.intercept:.4g}", f"r_squared\t{f.r_squared:.4g}",
               f"bins_used\t{f.bins_used}", f"zero_bins_skipped\t{f.zero_bins_skipped}"]
        pt = percentage_table(hist, hi)
        out.append("n\tcount\tpercent")
        out += [f"{r.n}\t{r.count}\t{r.percent}" for r in pt.rows]
        out.append(f"sum\t{pt.sum_line()}")
        return out
    if fam == "tail":
        hist = read_histogram_tsv(lines, src)
        f = fit_power_law_tail(hist, 10 if args.min is None else int(args.min), args.floor)
    elif fam == "normal":
        hist = read_histogram_tsv(lines, src, cls=LevelHistogram)
        f = fit_normal(hist, exclude_level0=not args.include_level0)
        return [f"mean\t{f.mean:.4g}", f"sigma\t{f.sigma:.4g}", f"n\t{f.n}",
                f"ks_statistic\t{f.ks_statistic:.4g}", f"ks_p\t{f.ks_p:.4g}"]
    elif fam == "growth":
        f = fit_growth(read_xy_tsv(lines, src))
        return [f"monthly_rate\t{f.monthly_rate:.4g}", f"r_squared\t{f.r_squared:.4g}", f"points\t{f.points}"]
    else:
        pts = read_xy_tsv(lines, src)
        lo = float("-inf") if args.min is None else args.min
        hi = 25 if args.max is None else args.max
        pts = [(x, c) for x, c in pts if lo <= x <= hi]
        f = fit_power_law_points([x for x, _ in pts], [c for _, c in pts])
    return [f"exponent\t{f.exponent:.4g}", f"intercept\t{f.intercept:.4g}", f"r_squared\t{f.r_squared:.4g}",
            f"points\t{f.bins_used}"]


def cmd_fit(args) -> int:
    print("\n".join(_fit_lines(args)))
    return 0


def cmd_synth(args) -> int:
    out = Path(args.out)
    if args.growth_rate is not None:
        try:
            series = generate_growth_series(args.growth_rate, args.months)
        except SpecInvalid as e:
            args.parser.error(str(e))
        out.mkdir(parents=True, exist_ok=True)
        _write(out / "growth.tsv", "".join(f"{t}\t{c}\n" for t, c in series))
        return 0
    if args.records is None or args.vocab is None:
        args.parser.error("--records and --vocab are required (or --growth-rate)")
    spec = GenSpec(seed=args.seed, record_count=args.records, vocab_size=args.vocab,
                   tags_lambda=args.tags_lambda, popularity_exponent=args.popularity,
                   hierarchy=args.hierarchy, branching=args.branching, depth=args.depth,
                   bt_lambda=args.bt_lambda)
    try:
        spec.check()
    except SpecInvalid as e:
        args.parser.error(str(e))
    system = write_generated(spec, out)
    print(f"{system.name}: {len(system.descriptors)} descriptors, {len(system.records)} records")
    return 0


def cmd_path(args) -> int:
    system, _ = _load(args)
    d = args.descriptor
    system.require(d)
    target = resolve(system, d)
    if target != d:
        print(f"{system.label(d)} USE {system.label(target)}", file=sys.stderr)
    for node in shortest_path_to_top(system, target, args.top_term or None):
        print(system.label(node))
    if args.dot:
        sys.stdout.write(export_ancestor_graph(system, target))
    return 0


def cmd_export(args) -> int:
    system, _ = _load(args)
    for p in write_bundle(system, Path(args.output)):
        print(p)
    return 0


# -- parser --------------------------------------------------------------------

def _bundle_options(p: argparse.ArgumentParser) -> None:
    p.add_argument("bundle", help="bundle directory")
    p.add_argument("--top-term", action="append", metavar="ID", help="top term id (repeatable; overrides meta.tsv)")
    p.add_argument("--virtual-root", action=argparse.BooleanOptionalAction, default=None,
                   help="attach every root to a synthetic top term")
    p.add_argument("--main-only", action=argparse.BooleanOptionalAction, default=None,
                   help="keep only main-namespace pages as records")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="indexkit", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"indexkit {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("analyze", help="metrics, fits and typology for a bundle")
    _bundle_options(p)
    p.add_argument("-o", "--output", required=True, help="output directory")
    p.add_argument("--resolve-use", action="store_true", help="count non-preferred tags as their targets")
    p.add_argument("--include-level0", action="store_true", help="keep level 0 in the normal fit")
    p.add_argument("--tags-range", type=_range, default=(1, 9), metavar="MIN,MAX")
    p.add_argument("--bt-range", type=_range, default=(1, 9), metavar="MIN,MAX")
    p.add_argument("--rank-k", type=int, default=25)
    p.add_argument("--tail-min", type=int, default=10)
    p.add_argument("--tail-floor", type=int, default=5)
    p.add_argument("--cooccurrence", type=int, default=10, metavar="M")
    p.add_argument("--format", type=_formats, default=["text", "json", "csv"], metavar="LIST",
                   help="comma list of text,json,csv (default: all)")
    p.set_defaults(func=cmd_analyze, needs_bundle=True)

    p = sub.add_parser("fit", help="fit one distribution to a TSV table")
    p.add_argument("table", type=Path)
    p.add_argument("--family", required=True, choices=["exponential", "powerlaw", "tail", "normal", "growth"])
    p.add_argument("--min", type=float, help="smallest x used")
    p.add_argument("--max", type=float, help="largest x used")
    p.add_argument("--floor", type=int, default=5, help="tail fit: minimum count per bin")
    p.add_argument("--include-level0", action="store_true")
    p.set_defaults(func=cmd_fit)

    p = sub.add_parser("synth", help="write a deterministic synthetic bundle")
    p.add_argument("--out", required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--records", type=int)
    p.add_argument("--vocab", type=int)
    p.add_argument("--tags-lambda", type=float, default=0.6)
    p.add_argument("--popularity", type=float, default=1.0, help="Zipf exponent of tag popularity")
    p.add_argument("--hierarchy", default="none", help="none, tree or dag")
    p.add_argument("--branching", type=int, default=2)
    p.add_argument("--depth", type=int, default=3)
    p.add_argument("--bt-lambda", type=float, default=0.4)
    p.add_argument("--growth-rate", type=float, help="write growth.tsv with this monthly rate instead")
    p.add_argument("--months", type=int, default=24)
    p.set_defaults(func=cmd_synth, parser=p)

    p = sub.add_parser("path", help="shortest broader-term path to a top term")
    _bundle_options(p)
    p.add_argument("descriptor")
    p.add_argument("--dot", action="store_true", help="also print the ancestor graph as DOT")
    p.set_defaults(func=cmd_path, needs_bundle=True)

    p = sub.add_parser("export", help="re-ingestable bundle of the parsed system")
    _bundle_options(p)
    p.add_argument("-o", "--output", required=True)
    p.set_defaults(func=cmd_export, needs_bundle=True)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if getattr(args, "needs_bundle", False):
        _bundle_dir(parser, args.bundle)
    if getattr(args, "table", None) is not None and not args.table.is_file():
        parser.error(f"table file not found: {args.table}")
    try:
        return args.func(args)
    except (IngestError, ModelError, FitError, _Failure) as e:
        print(f"indexkit: error: {e}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())

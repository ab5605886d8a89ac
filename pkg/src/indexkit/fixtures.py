"""Builders for the bundled example systems under ``fixtures/bundles``.

The published tables give distributions, not systems.  These builders
construct concrete bundles that realize them:

* ``ddc``        a class tree whose level counts equal the published DDC
                 column exactly (virtual top term at level 0).
* ``wikipedia``  a category graph with the published level counts exactly,
                 broader-term counts in the published proportions (scaled to
                 the number of reachable categories), and 1/50 of the
                 published article counts per number of categories.
* ``delicious``  a flat tagging sample: 1/50 of the published post counts
                 per number of tags, and the published top-25 tag counts.
* ``moon``       a small hand-made category graph (Moon, Apple, cancer).

Run ``python -m indexkit.fixtures [appendix_dir] [out_dir]`` to rebuild.
Output is byte-identical across runs.
"""
from __future__ import annotations

import bisect
import heapq
import math
import sys
from pathlib import Path

from .ingest import read_lines
from .metrics import read_histogram_tsv, read_rank_tsv
from .synthgen import _Uniform

SCALE = 50

DDC_MAIN = {
    "0": "Computer science, information & general works",
    "1": "Philosophy & psychology",
    "2": "Religion",
    "3": "Social sciences",
    "4": "Language",
    "5": "Science",
    "6": "Technology",
    "7": "Arts & recreation",
    "8": "Literature",
    "9": "History & geography",
}
# the Earth's moon chain; 559 hangs under 59 as listed, not under 55
DDC_CHAIN = [
    ("59", "Earth sciences & geology", "5"),
    ("559", "Other parts of world and extraterrestrial worlds", "59"),
    ("559.9", "Extraterrestrial worlds", "559"),
    ("559.91", "Earth's moon", "559.9"),
]

MOON_PAGECATS = """\
Category:Moon\tMoons
Category:Moon\tEarth
Category:Moons\tAstronomical objects
Category:Astronomical objects\tAstronomy
Category:Astronomy\tScience
Category:Earth\tPlanets of the Solar System
Category:Planets of the Solar System\tSolar System
Category:Solar System\tAstronomy
Category:Agriculture\tApplied sciences
Category:Applied sciences\tScience
Category:Apples\tFruits
Category:Fruits\tAgriculture
Category:Neoplasms\tOncology
Category:Oncology\tMedicine
Category:Medicine\tApplied sciences
Category:Stomach\tDigestive system
Category:Digestive system\tAnatomy
Category:Anatomy\tMedicine
Apple\tAgriculture
Apple\tApples
Moon\tMoon
Stomach cancer\tNeoplasms
Stomach cancer\tStomach
Discussion:Apple\tWikiProject Food
"""
MOON_REDIRECTS = """\
Category:Carcinoma\tCategory:Neoplasms
Category:Cancer\tCategory:Neoplasms
Category:Natural satellites\tCategory:Moons
Luna\tMoon
"""


def _write(path: Path, lines) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_bytes("".join(line + "\n" for line in lines).encode("utf-8"))


def _half_up(x: float) -> int:
    return int(math.floor(x + 0.5))


def _shuffle(items: list, u: _Uniform) -> list:
    items = list(items)
    for i in range(len(items) - 1, 0, -1):
        j = u.integer(i + 1)
        items[i], items[j] = items[j], items[i]
    return items


def _apportion(total: int, weights: list[float]) -> list[int]:
    """Split ``total`` proportionally to ``weights`` (largest remainder)."""
    s = sum(weights)
    raw = [total * w / s for w in weights]
    out = [int(math.floor(r)) for r in raw]
    order = sorted(range(len(raw)), key=lambda i: (-(raw[i] - out[i]), i))
    for i in order[: total - sum(out)]:
        out[i] += 1
    return out


def _scaled_record_counts(hist, scale: int, tail_exponent: float, tail_max: int, u: _Uniform) -> list[int]:
    """Per-record descriptor counts: the tabulated bins and overflow divided by ``scale``."""
    counts = []
    for n, c in hist.bins.items():
        counts += [n] * _half_up(c / scale)
    if hist.overflow:
        m = _half_up(hist.overflow / scale)
        ns = list(range(hist.overflow_from, tail_max + 1))
        for n, k in zip(ns, _apportion(m, [n ** -tail_exponent for n in ns])):
            counts += [n] * k
    return _shuffle(counts, u)


# -- moon -----------------------------------------------------------------------------

def build_moon(out: Path) -> None:
    out.mkdir(parents=True, exist_ok=True)
    (out / "pagecats.tsv").write_bytes(MOON_PAGECATS.encode())
    (out / "redirects.tsv").write_bytes(MOON_REDIRECTS.encode())
    _write(out / "meta.tsv", ["name\tMoon and Apple sample", "top_term\tScience"])


# -- ddc ------------------------------------------------------------------------------

def _ddc_child(parent: str, digit: int) -> str:
    if "." not in parent and len(parent) == 3:
        return f"{parent}.{digit}"
    return f"{parent}{digit}"


def build_ddc(out: Path, levels_tsv: Path, seed: int = 5) -> None:
    levels = read_histogram_tsv(read_lines(levels_tsv))
    counts = [levels.bins.get(i, 0) for i in range(max(levels.bins) + 1)]
    u = _Uniform(seed)
    lines = [(n, cap, "") for n, cap in DDC_MAIN.items()]
    if counts[1] != len(DDC_MAIN):
        raise ValueError("expected 10 main classes at level 1")
    forced = {2: [DDC_CHAIN[0]], 3: [DDC_CHAIN[1]], 4: [DDC_CHAIN[2]], 5: [DDC_CHAIN[3]]}
    blocked = {("55", 9)}  # notation 559 is taken by the chain node under 59
    prev = sorted(DDC_MAIN)
    for level in range(2, len(counts)):
        need = counts[level]
        chosen = [(n, cap, p) for n, cap, p in forced.get(level, [])]
        taken = {n for n, _, _ in chosen}
        slots = [(p, d) for p in prev for d in range(10)
                 if (p, d) not in blocked and _ddc_child(p, d) not in taken]
        for p, d in _shuffle(slots, u)[: need - len(chosen)]:
            n = _ddc_child(p, d)
            chosen.append((n, f"Class {n}", p))
        if len(chosen) != need:
            raise ValueError(f"cannot place {need} classes at level {level}")
        chosen.sort()
        lines += chosen
        prev = [n for n, _, _ in chosen]
    _write(out / "classes.tsv", [f"{n}\t{cap}\t{p}" for n, cap, p in lines])
    _write(out / "meta.tsv", ["name\tDDC-shaped classification", "virtual_root\ttrue"])


# -- del.icio.us ----------------------------------------------------------------------

def _realize_bipartite(record_degrees: list[int], tag_degrees: list[int], u: _Uniform) -> list[tuple[int, int]]:
    """Pair records with tags so every record/tag gets exactly its degree, no repeats."""
    heap = [(-d, u(), r) for r, d in enumerate(record_degrees) if d > 0]
    heapq.heapify(heap)
    pairs = []
    for t in sorted(range(len(tag_degrees)), key=lambda i: -tag_degrees[i]):
        k = tag_degrees[t]
        popped = [heapq.heappop(heap) for _ in range(k)]
        for negd, _, r in popped:
            pairs.append((r, t))
            if negd + 1 < 0:
                heapq.heappush(heap, (negd + 1, u(), r))
    if heap:
        raise ValueError("degree sequences do not match")
    return pairs


def build_delicious(out: Path, tags_tsv: Path, ranks_tsv: Path, seed: int = 7, vocab: int = 4000) -> None:
    u = _Uniform(seed)
    rec_deg = _scaled_record_counts(read_histogram_tsv(read_lines(tags_tsv)), SCALE, 4.0, 40, u)
    top = read_rank_tsv(read_lines(ranks_tsv))
    top_counts = [c for _, c, _ in top]
    remainder = sum(rec_deg) - sum(top_counts)
    # tail of vocab-25 tags below the smallest published count, power-law shaped
    ranks = range(len(top) + 1, vocab + 1)
    cap = min(top_counts) - 1
    lo, hi = 0.0, 10.0
    for _ in range(100):
        a = (lo + hi) / 2
        s = sum(max(1, min(cap, _half_up(cap * (r / len(top)) ** -a))) for r in ranks)
        lo, hi = (a, hi) if s > remainder else (lo, a)
    tail = [max(1, min(cap, _half_up(cap * (r / len(top)) ** -hi))) for r in ranks]
    diff = remainder - sum(tail)
    i = 0
    while diff:
        step = 1 if diff > 0 else -1
        if 1 <= tail[i] + step <= cap:
            tail[i] += step
            diff -= step
        i = (i + 1) % len(tail)
    labels = [lbl for _, _, lbl in top] + [f"tag{r:04d}" for r in ranks]
    pairs = _realize_bipartite(rec_deg, top_counts + tail, u)
    w = len(str(len(rec_deg)))
    _write(out / "assignments.tsv", sorted(f"post{r:0{w}d}\t{labels[t]}" for r, t in pairs))
    _write(out / "meta.tsv", ["name\tdel.icio.us-shaped flat tagging sample"])


# -- wikipedia ------------------------------------------------------------------------

WIKI_TOP = "Categories"
# (name, level, parents); the Moon has a second parent to make the hierarchy poly-hierarchical
WIKI_HAND = [
    ("Science", 1, [WIKI_TOP]),
    ("Astronomy", 2, ["Science"]),
    ("Astronomical objects", 3, ["Astronomy"]),
    ("Moons", 4, ["Astronomical objects"]),
    ("Planets", 4, ["Astronomical objects"]),
    ("Earth", 5, ["Planets"]),
    ("Moon", 5, ["Moons", "Earth"]),
]
WIKI_REDIRECTS = [
    ("Natural satellites", "Moons"),
    ("Earth's moon", "Moon"),
]


def build_wikipedia(out: Path, tags_tsv: Path, levels_tsv: Path, bt_tsv: Path, seed: int = 11) -> None:
    u = _Uniform(seed)
    levels = read_histogram_tsv(read_lines(levels_tsv))
    bt = read_histogram_tsv(read_lines(bt_tsv))
    counts = [levels.bins.get(i, 0) for i in range(max(levels.bins) + 1)]

    # level 0: the top term plus categories without a path to it; two of those
    # point at each other (a broader-term cycle), two are redirect sources
    n_unreach = counts[0] - 1
    unreach = [src for src, _ in WIKI_REDIRECTS]
    unreach += [f"Uncategorized {i:03d}" for i in range(n_unreach - len(unreach))]
    cycle = ("Uncategorized 000", "Uncategorized 001")

    by_level: list[list[str]] = [[WIKI_TOP]]
    serial = 0
    for level in range(1, len(counts)):
        names = [h for h, lv, _ in WIKI_HAND if lv == level]
        while len(names) < counts[level]:
            serial += 1
            names.append(f"Topic {serial:05d}")
        by_level.append(names)
    hand = {h: ps for h, _, ps in WIKI_HAND}

    reachable = sum(counts[1:])
    b_counts = _apportion(reachable, [bt.bins.get(b, 0) for b in range(1, max(bt.bins) + 1)])
    pool = []
    for b, k in enumerate(b_counts, 1):
        pool += [b] * k
    for ps in hand.values():
        pool.remove(len(ps))
    pool = _shuffle(pool, u)

    parents: dict[str, list[str]] = {}
    for level in range(1, len(counts)):
        names = by_level[level]
        gen = [n for n in names if n not in hand]
        bs = [pool.pop() for _ in gen]
        if level == 1:
            bs.sort()
        bvals = dict(zip(gen, bs))
        above = by_level[level - 1]
        for i, n in enumerate(names):
            if n in hand:
                parents[n] = hand[n]
                continue
            b = bvals[n]
            first = above[u.integer(len(above))]
            # extras come from the level above or earlier nodes on this level
            span = len(above) + i
            if b > span:
                raise ValueError(f"not enough candidate parents for {n}")
            chosen = {first}
            while len(chosen) < b:
                j = u.integer(span)
                chosen.add(above[j] if j < len(above) else names[j - len(above)])
            parents[n] = sorted(chosen)
    parents[cycle[0]] = [cycle[1]]
    parents[cycle[1]] = [cycle[0]]

    # articles: 1/50 of the published counts, categories drawn with Zipf weights
    rec_deg = _scaled_record_counts(read_histogram_tsv(read_lines(tags_tsv)), SCALE, 6.0, 30, u)
    cats = _shuffle([n for lv in by_level[1:] for n in lv] + unreach, u)
    weights = [(i + 1) ** -0.96 for i in range(len(cats))]
    cdf, acc = [], 0.0
    for w in weights:
        acc += w
        cdf.append(acc)

    w = len(str(len(rec_deg)))
    pagecats, records = [], []
    for child, ps in parents.items():
        pagecats += [f"Category:{child}\t{p}" for p in ps]
    for r, k in enumerate(rec_deg):
        title = f"Article {r:0{w}d}"
        if k == 0:
            records.append(title)
        chosen: set[int] = set()
        while len(chosen) < k:
            chosen.add(min(bisect.bisect_right(cdf, u() * acc), len(cats) - 1))
        pagecats += [f"{title}\t{cats[i]}" for i in chosen]
    referenced = {src for src, _ in WIKI_REDIRECTS} | set(parents)
    referenced |= {line.split("\t")[1] for line in pagecats}
    isolated = sorted(n for n in unreach if n not in referenced)

    _write(out / "pagecats.tsv", sorted(pagecats))
    _write(out / "records.tsv", sorted(records))
    _write(out / "descriptors.tsv", isolated)
    _write(out / "redirects.tsv", [f"Category:{a}\tCategory:{b}" for a, b in WIKI_REDIRECTS] + ["Luna\tMoon"])
    _write(out / "meta.tsv", ["name\tWikipedia-shaped category sample", f"top_term\t{WIKI_TOP}"])


def build_all(appendix: Path, out: Path) -> None:
    appendix, out = Path(appendix), Path(out)
    build_moon(out / "moon")
    build_ddc(out / "ddc", appendix / "ddc" / "levels.tsv")
    build_delicious(out / "delicious", appendix / "delicious" / "tags_per_record.tsv",
                    appendix / "delicious" / "ranks.tsv")
    build_wikipedia(out / "wikipedia", appendix / "wikipedia" / "tags_per_record.tsv",
                    appendix / "wikipedia" / "levels.tsv", appendix / "wikipedia" / "broader_terms.tsv")


if __name__ == "__main__":
    args = sys.argv[1:]
    build_all(Path(args[0]) if args else Path("fixtures/appendix"),
              Path(args[1]) if len(args) > 1 else Path("fixtures/bundles"))

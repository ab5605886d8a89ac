import itertools
from collections import Counter
from fractions import Fraction

import numpy as np
import pytest
from helpers import APPENDIX, make_system
from hypothesis import given, settings
from hypothesis import strategies as st

from indexkit.ingest import MalformedLine, read_lines
from indexkit.metrics import (Histogram, LevelHistogram, RankTable, broader_terms_per_term, cooccurrence_top,
                              coverage, level_histogram, percentage_table, read_histogram_tsv, read_rank_tsv,
                              read_table_bundle, records_per_tag, round_percent, tag_size_histogram,
                              tags_per_record, unused_descriptor_count)
from indexkit.model import EmptySystem


def random_tagging(seed, n_rec=40, n_tags=15):
    rng = np.random.default_rng(seed)
    recs = {}
    for r in range(n_rec):
        k = int(rng.integers(0, 6))
        recs[f"r{r}"] = [f"t{int(x)}" for x in rng.choice(n_tags, size=k, replace=False)]
    return make_system(records=recs, extra=[f"t{i}" for i in range(n_tags)])


# -- tags per record ------------------------------------------------------------------

def test_two_single_tag_records():
    h = tags_per_record(make_system(records={"a": ["x"], "b": ["y"]}))
    assert h.bins == {1: 2} and h.total == 2


def test_zero_bucket_kept():
    h = tags_per_record(make_system(records={"a": [], "b": ["y"]}))
    assert h.bins == {0: 1, 1: 1}


def test_wikipedia_published_tags_table():
    h = read_table_bundle(APPENDIX / "wikipedia")["tags_per_record"]
    assert [h.bins[n] for n in range(4)] == [52264, 281572, 277956, 141270]
    assert h.overflow == 6526 and h.total == 923196


def test_wikipedia_percentages():
    h = read_table_bundle(APPENDIX / "wikipedia")["tags_per_record"]
    pt = percentage_table(h)
    assert [r.percent for r in pt.rows if r.n >= 1] == [30, 30, 15, 8, 5, 2, 1, 1, 0]
    assert pt.sum_line() == "916670 of 923196"
    assert pt.covered_percent == 99


@pytest.mark.parametrize("count,total,pct", [(1, 200, 1), (1, 201, 0), (5, 10, 50), (0, 7, 0), (3885, 923196, 0)])
def test_round_half_up(count, total, pct):
    assert round_percent(count, total) == pct


# -- records per tag ------------------------------------------------------------------

def test_single_tag():
    t = records_per_tag(make_system(records={"r": ["a"]}))
    assert [(e.label, e.count) for e in t.entries] == [("a", 1)]


def test_tie_break_by_label():
    t = records_per_tag(make_system(records={"r1": ["b", "a"], "r2": ["a", "b"], "r3": ["c"]}))
    assert [e.label for e in t.entries] == ["a", "b", "c"]


def test_delicious_top_entries(delicious):
    t = records_per_tag(delicious, 25)
    assert (t.entries[0].label, t.entries[0].count) == ("blog", 902)
    assert (t.entries[24].label, t.entries[24].count) == ("opensource", 248)


def test_unused_excluded_but_counted():
    s = make_system(records={"r": ["a"]}, extra=["b", "c"])
    t = records_per_tag(s)
    assert len(t.entries) == 1 and t.unused == 2
    assert unused_descriptor_count(s) == 2


def test_rank_table_must_not_increase():
    from indexkit.metrics import RankEntry
    with pytest.raises(ValueError):
        RankTable((RankEntry("a", "a", 1), RankEntry("b", "b", 2)))


def test_resolve_use_merges_counts():
    s = make_system(records={"r1": ["Cancer"], "r2": ["Neoplasms"]}, use={"Cancer": "Neoplasms"})
    assert records_per_tag(s).counts == [1, 1]
    assert records_per_tag(s, resolve_use=True).counts == [2]


def test_empty_system():
    with pytest.raises(EmptySystem):
        records_per_tag(make_system())


# -- tag sizes --------------------------------------------------------------------------

def test_tag_sizes_small():
    recs = {f"r{i}": [t for t, n in (("a", 5), ("b", 5), ("c", 2)) if i < n] for i in range(5)}
    assert tag_size_histogram(make_system(records=recs)).bins == {2: 1, 5: 2}


def test_single_descriptor_many_records():
    assert tag_size_histogram(make_system(records={f"r{i}": ["x"] for i in range(7)})).bins == {7: 1}


def test_wikipedia_tag_sizes_power_law_tail(wikipedia):
    from indexkit.distfit import fit_power_law_points
    h = tag_size_histogram(wikipedia)
    pts = [(k, v) for k, v in h.bins.items() if v >= 5]
    f = fit_power_law_points([k for k, _ in pts], [v for _, v in pts])
    assert f.exponent > 1 and f.r_squared > 0.8


# -- hierarchy tables ---------------------------------------------------------------------

def test_perfect_tree_broader_terms():
    bt = {f"n{i}": [f"n{(i - 1) // 2}"] for i in range(1, 15)}
    assert broader_terms_per_term(make_system(bt)).bins == {0: 1, 1: 14}


def test_diamond_broader_terms():
    s = make_system({"A": ["B", "C"], "B": ["D"], "C": ["D"]})
    assert broader_terms_per_term(s).bins[2] >= 1


def test_wikipedia_published_broader_terms():
    h = read_table_bundle(APPENDIX / "wikipedia")["broader_terms"]
    assert [h.bins[b] for b in (1, 2, 3)] == [15572, 9143, 4219]


def test_level_histograms(ddc, wikipedia):
    d = level_histogram(ddc)
    assert [d.bins[i] for i in range(5)] == [1, 10, 99, 879, 8121]
    w = level_histogram(wikipedia)
    assert [w.bins[i] for i in range(3)] == [899, 67, 448]
    assert w.unreachable_in_level0 == 898
    pub = read_table_bundle(APPENDIX / "wikipedia")["levels"]
    assert w.bins == pub.bins


def test_chain_levels():
    s = make_system({"c": ["b"], "b": ["a"]}, tops=["a"])
    assert level_histogram(s).bins == {0: 1, 1: 1, 2: 1}


# -- coverage ----------------------------------------------------------------------------

def test_coverage_empty():
    c = coverage(make_system())
    assert (c.records, c.categorized, c.ratio) == (0, 0, None)


def test_coverage_all_tagged():
    assert coverage(make_system(records={"a": ["x"], "b": ["y"]})).ratio == 1


def test_coverage_wikipedia(wikipedia):
    c = coverage(wikipedia)
    assert c.records - c.categorized == 1045


# -- co-occurrence -----------------------------------------------------------------------

def test_pair_once():
    assert cooccurrence_top(make_system(records={"r": ["A", "B"]}), 5) == [(("A", "B"), 1)]


def test_apple_pair(moon):
    pairs = dict(cooccurrence_top(moon, 50))
    assert pairs[("Agriculture", "Apples")] == 1


def test_three_records_same_pair():
    s = make_system(records={f"r{i}": ["X", "Y"] for i in range(3)})
    assert cooccurrence_top(s, 1) == [(("X", "Y"), 3)]


# -- identities and naive oracles ----------------------------------------------------------

@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_double_counting_identities(seed):
    s = random_tagging(seed)
    a = s.assignment_count
    assert tags_per_record(s).weighted_sum == a
    assert sum(e.count for e in records_per_tag(s).entries) == a
    assert tag_size_histogram(s).weighted_sum == a


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_naive_oracles(seed):
    s = random_tagging(seed)
    recs = {r: sorted(x.descriptors) for r, x in s.records.items()}
    assert tags_per_record(s).bins == dict(sorted(Counter(len(v) for v in recs.values()).items()))
    use = Counter(t for v in recs.values() for t in v)
    expected = sorted(use.items(), key=lambda kv: (-kv[1], kv[0]))
    assert [(e.id, e.count) for e in records_per_tag(s).entries] == expected
    pairs = Counter()
    for v in recs.values():
        for a, b in itertools.combinations(v, 2):
            pairs[(a, b)] += 1
    top = sorted(pairs.items(), key=lambda kv: (-kv[1], kv[0]))[:10]
    assert cooccurrence_top(s, 10) == top
    assert coverage(s).ratio == (Fraction(sum(1 for v in recs.values() if v), len(recs)) if recs else None)


@pytest.mark.parametrize("seed", range(10))
def test_hierarchy_identities(seed):
    from helpers import random_dag
    rng = np.random.default_rng(seed)
    names, bt, tops = random_dag(rng, 100)
    s = make_system(bt, tops=tops, extra=names)
    assert broader_terms_per_term(s).weighted_sum == s.bt_edge_count
    assert level_histogram(s).total == len(s.descriptors)


# -- table readers ---------------------------------------------------------------------------

def test_histogram_overflow_row():
    h = read_histogram_tsv(["1\t5", "2\t3", ">=10\t4"])
    assert h.bins == {1: 5, 2: 3} and h.overflow == 4 and h.overflow_from == 10 and h.total == 12


def test_histogram_bad_row():
    with pytest.raises(MalformedLine):
        read_histogram_tsv(["1\tfive"], source="t.tsv")


def test_histogram_round_trip():
    h = LevelHistogram({0: 3, 1: 2}, unreachable_in_level0=2)
    assert LevelHistogram.from_dict(h.to_dict()) == h
    g = Histogram({1: 1}, overflow=3, overflow_from=10)
    assert Histogram.from_dict(g.to_dict()) == g


def test_ddc_published_ranks_kept_in_file_order():
    rows = read_rank_tsv(read_lines(APPENDIX / "ddc" / "ranks.tsv"))
    assert len(rows) == 25
    counts = [c for _, c, _ in rows]
    assert counts != sorted(counts, reverse=True)  # published order is not monotone

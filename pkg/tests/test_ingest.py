import random

import pytest
from helpers import BUNDLES
from hypothesis import given, settings
from hypothesis import strategies as st

from indexkit.ingest import (EmptyTitle, EncodingError, LineStats, MalformedLine, MultipleParents,
                             UnknownParent, build_system, load_bundle, normalize_label, parse_assignments,
                             parse_classification, parse_meta, parse_pagecats, parse_redirects,
                             parse_relations, parse_wiki_title, read_classes)
from indexkit.metrics import level_histogram
from indexkit.model import EmptySystem, levels, validate
from indexkit.typology import classify, export_terminology, write_bundle


def shape(system):
    """Isomorphism invariants: sizes and label sets."""
    return (
        len(system.records), len(system.descriptors), system.bt_edge_count, len(system.rt_edges),
        system.use_link_count, system.assignment_count,
        sorted(d.label for d in system.descriptors.values()),
        sorted(r.label for r in system.records.values()),
    )


# -- titles -----------------------------------------------------------------------

@pytest.mark.parametrize("raw,ns,rest", [
    ("[[Category:Agriculture]]", "Category", "Agriculture"),
    ("Apple", "", "Apple"),
    ("Discussion:Apple", "Discussion", "Apple"),
    ("ISO 2788: thesauri", "", "ISO 2788: thesauri"),
    ("category:Moons", "Category", "Moons"),
    ("  Category:  Solar   System ", "Category", "Solar System"),
])
def test_parse_wiki_title(raw, ns, rest):
    t = parse_wiki_title(raw)
    assert (t.namespace, t.rest) == (ns, rest)


@pytest.mark.parametrize("raw", ["", "[[ ]]", "Category:"])
def test_empty_titles(raw):
    with pytest.raises(EmptyTitle):
        parse_wiki_title(raw)


def test_normalize_label_keeps_case():
    assert normalize_label("  iPod \t  nano ") == "iPod nano"


# -- assignments --------------------------------------------------------------------

def test_assignment_line():
    out = parse_assignments(["post1\tblog"])
    assert [(a.record_label, a.descriptor_label, a.source_line) for a in out] == [("post1", "blog", 1)]


def test_comments_and_blanks_skipped():
    stats = LineStats()
    out = parse_assignments(["# comment", "", "p\tt", "   "], stats=stats)
    assert len(out) == 1
    assert (stats.read, stats.parsed, stats.skipped, stats.malformed) == (4, 1, 3, 0)


def test_empty_descriptor_is_malformed():
    with pytest.raises(MalformedLine) as e:
        parse_assignments(["post1\t"], source="a.tsv")
    assert e.value.line == 1
    assert str(e.value).startswith("a.tsv:1:")


def test_crlf_accepted():
    assert parse_assignments([b"p\tt\r\n"])[0].descriptor_label == "t"


def test_invalid_utf8_is_fatal():
    with pytest.raises(EncodingError) as e:
        parse_assignments([b"ok\tfine\n", b"p\t\xff\xfe\n"], source="x.tsv")
    assert e.value.line == 2


@settings(max_examples=50, deadline=None)
@given(st.lists(st.sampled_from(["p\tt", "# c", "", "q\tu v", "  "]), max_size=30))
def test_line_totals_reconcile(lines):
    stats = LineStats()
    parse_assignments(lines, stats=stats)
    assert stats.read == stats.parsed + stats.skipped + stats.malformed


def test_line_totals_count_malformed():
    stats = LineStats()
    with pytest.raises(MalformedLine):
        parse_assignments(["a\tb", "# x", "bad"], stats=stats)
    assert stats.read == stats.parsed + stats.skipped + stats.malformed == 3


# -- pagecats / redirects -------------------------------------------------------------

def test_page_becomes_record():
    frag = parse_pagecats(["Apple\tAgriculture"])
    assert frag.assignments == [("Apple", "Agriculture")]
    assert frag.bt == []


def test_category_page_becomes_bt():
    frag = parse_pagecats(["Category:Moons\tAstronomical objects"])
    assert frag.bt == [("Moons", "Astronomical objects")]


def test_category_self_loop_dropped():
    frag = parse_pagecats(["Category:X\tX"])
    assert frag.bt == [] and frag.warnings["bt_self_loop"] == 1
    system, report = build_system(frag)
    assert system.bt_edge_count == 0
    assert report.warnings["bt_self_loop"] == 1


def test_main_only_skips_other_namespaces():
    lines = ["Apple\tFruits", "Discussion:Apple\tWikiProject Food"]
    assert len(parse_pagecats(lines).assignments) == 2
    frag = parse_pagecats(lines, main_only=True)
    assert frag.assignments == [("Apple", "Fruits")]
    system, _ = build_system(frag)
    assert "WikiProject Food" in system.descriptors


def test_redirects():
    frag = parse_redirects(["Category:Carcinoma\tCategory:Neoplasms", "Apple pie\tApple",
                            "Category:A\tCategory:A"])
    assert frag.links == [("Carcinoma", "Neoplasms")]
    assert frag.ignored == 1
    assert frag.warnings["use_self_loop"] == 1


def test_pagecats_and_redirects_make_thesaurus(moon):
    assert classify(moon).kind == "Thesaurus"
    d = moon.descriptors["Carcinoma"]
    assert not d.preferred and d.use_target == "Neoplasms"


def test_moon_record_namespaces(moon):
    assert set(moon.records) == {"Apple", "Moon", "Stomach cancer", "Discussion:Apple"}
    assert moon.records["Apple"].descriptors == {"Agriculture", "Apples"}


# -- classification ---------------------------------------------------------------------

DDC_EXCERPT = [
    "5\tScience\t",
    "59\tEarth sciences & geology\t5",
    "559\tOther parts of world and extraterrestrial worlds\t59",
    "559.9\tExtraterrestrial worlds\t559",
    "559.91\tEarth's moon\t559.9",
]


def test_ddc_excerpt_levels():
    s = parse_classification(DDC_EXCERPT, virtual_root=True)
    lv = levels(s)
    assert [lv[n] for n in ["5", "59", "559", "559.9", "559.91"]] == [1, 2, 3, 4, 5]
    assert s.label("559.91") == "Earth's moon"


def test_two_roots_are_tops():
    s = parse_classification(["1\tA\t", "2\tB\t", "11\tC\t1"])
    assert s.effective_tops() == {"1", "2"}


def test_multiple_parents():
    with pytest.raises(MultipleParents) as e:
        read_classes(["5\ta\t", "59\tb\t5", "559\tX\t5", "559\tX\t59"])
    assert e.value.notation == "559"


def test_unknown_parent():
    with pytest.raises(UnknownParent):
        read_classes(["559\tX\t55"])


@settings(max_examples=40, deadline=None)
@given(st.lists(st.integers(0, 10**6), min_size=1, max_size=60))
def test_classification_is_always_a_tree(parents):
    lines = ["n0\troot\t"]
    for i, p in enumerate(parents, 1):
        lines.append(f"n{i}\tc{i}\tn{p % i}")
    s = parse_classification(lines, virtual_root=True)
    assert all(len(ps) <= 1 for ps in s.bt_edges.values())
    assert validate(s).bt_cycle_descriptor_count == 0
    assert classify(s).kind == "Classification"


# -- relations and meta --------------------------------------------------------------------

def test_relations_fold_inverses():
    frag = parse_relations(["A\tNT\tB", "X\tUF\tY", "P\tRT\tQ"])
    assert frag.triples == [("B", "BT", "A"), ("Y", "USE", "X"), ("P", "RT", "Q")]


def test_unknown_relation():
    with pytest.raises(MalformedLine):
        parse_relations(["A\tSEE\tB"])


def test_meta():
    m = parse_meta(["name\tX", "top_term\tA", "top_term\tB", "virtual_root\ttrue"])
    assert (m.name, m.top_terms, m.virtual_root) == ("X", ["A", "B"], True)
    with pytest.raises(MalformedLine):
        parse_meta(["colour\tblue"])


# -- builder -----------------------------------------------------------------------------

def test_assignments_only_is_flat():
    system, _ = build_system(parse_assignments(["p\ta", "p\tb", "q\ta"]))
    assert system.bt_edge_count == 0
    assert classify(system).kind == "FlatTagging"


def test_duplicate_assignment_collapsed():
    system, report = build_system(parse_assignments(["p\ta", "p\ta"]))
    assert system.assignment_count == 1
    assert report.warnings["duplicate_assignment"] == 1


def test_empty_input():
    system, _ = build_system()
    assert len(system.descriptors) == 0
    from indexkit.metrics import records_per_tag
    with pytest.raises(EmptySystem):
        records_per_tag(system)


def test_virtual_root_attaches_roots():
    system, _ = build_system(read_classes(["1\tA\t", "2\tB\t"]), virtual_root=True)
    lh = level_histogram(system)
    assert lh.bins == {0: 1, 1: 2}


def test_unknown_top_term_warns():
    system, report = build_system(parse_assignments(["p\ta"]), top_terms=["nope"])
    assert report.warnings["unknown_top_term"] == 1
    assert not system.top_terms


# -- order insensitivity and round trip -----------------------------------------------------

@pytest.mark.parametrize("seed", range(5))
def test_permuted_lines_give_isomorphic_system(seed):
    pc = (BUNDLES / "moon" / "pagecats.tsv").read_text().splitlines()
    rd = (BUNDLES / "moon" / "redirects.tsv").read_text().splitlines()
    base, _ = build_system(parse_pagecats(pc), parse_redirects(rd), top_terms=["Science"])
    rng = random.Random(seed)
    rng.shuffle(pc)
    rng.shuffle(rd)
    perm, _ = build_system(parse_redirects(rd), parse_pagecats(pc), top_terms=["Science"])
    assert shape(perm) == shape(base)
    assert perm.bt_edges == base.bt_edges
    assert levels(perm) == levels(base)


@pytest.mark.parametrize("bundle", ["moon", "ddc", "delicious"])
def test_export_reingest_round_trip(bundle, tmp_path):
    system, _ = load_bundle(BUNDLES / bundle)
    write_bundle(system, tmp_path)
    again, _ = load_bundle(tmp_path)
    assert shape(again) == shape(system)
    assert export_terminology(again) == export_terminology(system)


def test_round_trip_preserves_use_flags(moon, tmp_path):
    write_bundle(moon, tmp_path)
    again, _ = load_bundle(tmp_path)
    for d in moon.descriptors.values():
        e = again.descriptors[d.id]
        assert (e.preferred, e.use_target) == (d.preferred, d.use_target)

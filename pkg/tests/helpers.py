"""Small builders shared by the test modules."""
from __future__ import annotations

from pathlib import Path

from indexkit.model import Descriptor, IndexingSystem, Record

ROOT = Path(__file__).resolve().parents[1]
APPENDIX = ROOT / "fixtures" / "appendix"
BUNDLES = ROOT / "fixtures" / "bundles"


def make_system(bt=None, tops=(), records=None, extra=(), use=None, rt=(), name="t", virtual_root=False):
    """``bt`` maps child -> parents; ``records`` maps record id -> descriptor ids."""
    bt = {c: frozenset(ps) for c, ps in (bt or {}).items()}
    use = dict(use or {})
    ids = set(extra) | set(bt) | {p for ps in bt.values() for p in ps} | set(tops)
    ids |= set(use) | set(use.values()) | {x for pair in rt for x in pair}
    for ds in (records or {}).values():
        ids |= set(ds)
    desc = {d: Descriptor(d, d, d not in use, use.get(d)) for d in ids}
    recs = {r: Record(r, r, frozenset(ds)) for r, ds in (records or {}).items()}
    rts = frozenset(tuple(sorted(p)) for p in rt)
    return IndexingSystem(name, desc, recs, bt, rts, frozenset(tops), virtual_root)


def chain(*names, tops=None):
    """``chain("A", "B", "C")``: A BT B, B BT C, top C."""
    bt = {a: [b] for a, b in zip(names, names[1:])}
    return make_system(bt, tops=[names[-1]] if tops is None else tops)


def random_dag(rng, n, p_extra=0.3, max_parents=3):
    """Random BT DAG on ``d000..``; node i points to lower indices; returns (bt, tops)."""
    names = [f"d{i:03d}" for i in range(n)]
    n_tops = max(1, int(rng.integers(1, 4)))
    bt = {}
    for i in range(n_tops, n):
        if rng.random() < 0.05:
            continue  # an orphan, unreachable unless it is a top
        k = 1 + int(rng.binomial(max_parents - 1, p_extra))
        ps = rng.choice(i, size=min(k, i), replace=False)
        bt[names[i]] = [names[j] for j in ps]
    return names, bt, names[:n_tops]

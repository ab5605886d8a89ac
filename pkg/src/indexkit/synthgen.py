"""Deterministic synthetic indexing systems with prescribed shapes.

Randomness comes only from uniform doubles of numpy's counter-based
Philox bit generator keyed by the seed; every distribution is sampled by
explicit inverse-CDF code here, so a seed maps to the same system on
every platform.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .model import Descriptor, IndexingSystem, Record

TAIL_MASS = 0.015
TAIL_EXPONENT = 4.0
TAIL_MAX = 40
HIERARCHIES = ("none", "tree", "dag")


class SpecInvalid(ValueError):
    pass


@dataclass(frozen=True)
class GenSpec:
    seed: int
    record_count: int
    vocab_size: int
    tags_lambda: float = 0.6
    popularity_exponent: float = 1.0
    hierarchy: str = "none"
    branching: int = 2
    depth: int = 3
    bt_lambda: float = 0.4

    def check(self) -> None:
        if not 0 <= self.seed < 2 ** 64:
            raise SpecInvalid("seed must fit in 64 bits")
        if self.record_count < 1 or self.vocab_size < 1:
            raise SpecInvalid("record_count and vocab_size must be >= 1")
        if not (self.tags_lambda > 0 and self.bt_lambda > 0):
            raise SpecInvalid("lambdas must be positive")
        if self.popularity_exponent < 0:
            raise SpecInvalid("popularity_exponent must be >= 0")
        if self.hierarchy not in HIERARCHIES:
            raise SpecInvalid(f"hierarchy must be one of {HIERARCHIES}")
        if self.hierarchy == "tree" and (self.branching < 1 or self.depth < 0):
            raise SpecInvalid("tree needs branching >= 1 and depth >= 0")

    @property
    def descriptor_count(self) -> int:
        if self.hierarchy == "tree":
            b, d = self.branching, self.depth
            return d + 1 if b == 1 else (b ** (d + 1) - 1) // (b - 1)
        return self.vocab_size


class _Uniform:
    """Buffered uniform doubles in [0, 1) from Philox."""

    def __init__(self, seed: int, block: int = 1 << 14):
        self._gen = np.random.Generator(np.random.Philox(seed))
        self._block = block
        self._buf = np.empty(0)
        self._i = 0

    def __call__(self) -> float:
        if self._i >= self._buf.size:
            self._buf = self._gen.random(self._block)
            self._i = 0
        u = self._buf[self._i]
        self._i += 1
        return float(u)

    def integer(self, n: int) -> int:
        return min(int(self() * n), n - 1)


def _tag_count_cdf(lam: float, cap: int) -> np.ndarray:
    """CDF over n = 1..TAIL_MAX: exponential body on 1..9, power-law tail beyond."""
    body = np.exp(-lam * np.arange(1, 10))
    tail = np.arange(10, TAIL_MAX + 1, dtype=float) ** -TAIL_EXPONENT
    p = np.concatenate((body / body.sum() * (1 - TAIL_MASS), tail / tail.sum() * TAIL_MASS))
    p[cap:] = 0.0
    cdf = np.cumsum(p)
    return cdf / cdf[-1]


def _ids(prefix: str, n: int) -> list[str]:
    w = len(str(max(n - 1, 0)))
    return [f"{prefix}{i:0{w}d}" for i in range(n)]


def generate(spec: GenSpec) -> IndexingSystem:
    """Build a system from ``spec``.

    Tag counts per record follow a truncated exponential on 1..9 with a
    small power-law tail; tags are drawn without replacement with Zipf
    weights ``rank^-popularity_exponent`` (rank = descriptor index + 1).
    ``dag`` gives descriptor ``i`` a geometric number of broader terms
    chosen uniformly among lower indices, so the result is acyclic.
    """
    spec.check()
    u = _Uniform(spec.seed)
    n_desc = spec.descriptor_count
    dids = _ids("t", n_desc)

    bt: dict[str, frozenset[str]] = {}
    tops: frozenset[str] = frozenset()
    if spec.hierarchy == "tree":
        for i in range(1, n_desc):
            bt[dids[i]] = frozenset({dids[(i - 1) // spec.branching]})
        tops = frozenset({dids[0]})
    elif spec.hierarchy == "dag":
        q = math.exp(-spec.bt_lambda)
        for i in range(1, n_desc):
            # geometric on 1, 2, ...: P(b) proportional to q^(b-1)
            b = 1 + int(math.log(1.0 - u()) / math.log(q))
            b = min(b, i)
            parents: set[int] = set()
            if b == i:
                parents = set(range(i))
            while len(parents) < b:
                parents.add(u.integer(i))
            bt[dids[i]] = frozenset(dids[p] for p in parents)
        tops = frozenset({dids[0]})

    weights = np.arange(1, n_desc + 1, dtype=float) ** -spec.popularity_exponent
    pop_cdf = np.cumsum(weights)
    pop_cdf /= pop_cdf[-1]
    count_cdf = _tag_count_cdf(spec.tags_lambda, n_desc)

    records = {}
    for rid in _ids("r", spec.record_count):
        k = int(np.searchsorted(count_cdf, u(), side="right")) + 1
        chosen: set[int] = set()
        attempts = 0
        while len(chosen) < k and attempts < 64 * k:
            chosen.add(min(int(np.searchsorted(pop_cdf, u(), side="right")), n_desc - 1))
            attempts += 1
        for i in range(n_desc):  # deterministic fill when rejection stalls
            if len(chosen) >= k:
                break
            chosen.add(i)
        records[rid] = Record(rid, rid, frozenset(dids[i] for i in chosen))

    descriptors = {d: Descriptor(d, d) for d in dids}
    name = f"synthetic-{spec.hierarchy}-seed{spec.seed}"
    return IndexingSystem(name, descriptors, records, bt, frozenset(), tops)


def generate_growth_series(rate: float, months: int, start: float = 1000.0) -> list[tuple[int, int]]:
    """``count(t) = round(start * (1 + rate)^t)`` for ``t = 0 .. months-1``."""
    if not rate > -1 or months < 2 or start < 1:
        raise SpecInvalid("need rate > -1, months >= 2, start >= 1")
    return [(t, int(math.floor(start * (1 + rate) ** t + 0.5))) for t in range(months)]


def write_generated(spec: GenSpec, directory: Path) -> IndexingSystem:
    from .typology import write_bundle

    system = generate(spec)
    write_bundle(system, directory)
    return system

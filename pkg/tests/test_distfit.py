import math

import numpy as np
import pytest
from helpers import APPENDIX
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.stats import norm

from indexkit.distfit import (DegenerateDistribution, ExponentialFit, GrowthFit, InsufficientBins,
                              InsufficientData, NonPositiveCount, NormalFit, PowerLawFit, fit_exponential,
                              fit_growth, fit_normal, fit_power_law_points, fit_power_law_ranks,
                              fit_power_law_tail, kolmogorov_sf, ks_test, ols)
from indexkit.ingest import read_lines
from indexkit.metrics import Histogram, LevelHistogram, RankTable, read_rank_tsv, read_table_bundle


def tables(name):
    return read_table_bundle(APPENDIX / name)


def polyfit_slope(x, y):
    """Independent least-squares oracle."""
    return float(np.polyfit(np.asarray(x, float), np.asarray(y, float), 1)[0])


def ks_bruteforce(bins, mean, sigma):
    keys = sorted(bins)
    total = sum(bins.values())
    pts = [keys[0] - 1] + keys
    best = 0.0
    for x in pts:
        emp = sum(c for k, c in bins.items() if k <= x) / total
        best = max(best, abs(emp - norm.cdf(x, mean, sigma)))
    return best


# -- OLS ---------------------------------------------------------------------------

def test_ols_exact_line():
    f = ols([1, 2, 3], [5, 7, 9])
    assert f.slope == pytest.approx(2) and f.intercept == pytest.approx(3) and f.r_squared == 1


def test_ols_needs_two_distinct_x():
    with pytest.raises(InsufficientBins):
        ols([1], [1])
    with pytest.raises(InsufficientBins):
        ols([2, 2], [1, 3])


# -- exponential --------------------------------------------------------------------

@pytest.mark.parametrize("name,expected", [("wikipedia", 0.574), ("delicious", 0.51)])
def test_exponential_published_tags(name, expected):
    h = tables(name)["tags_per_record"]
    f = fit_exponential(h, 1, 9)
    ns = range(1, 10)
    assert f.lambda_ == pytest.approx(-polyfit_slope(ns, [math.log(h.bins[n]) for n in ns]), abs=1e-12)
    assert f.lambda_ == pytest.approx(expected, abs=0.005)
    assert f.bins_used == 9


def test_exponential_published_broader_terms():
    h = tables("wikipedia")["broader_terms"]
    f = fit_exponential(h, 1, 9)
    assert f.lambda_ == pytest.approx(0.377, abs=0.002)


def test_exponential_noiseless():
    h = Histogram({n: round(1e6 * math.exp(-0.7 * n)) for n in range(1, 10)})
    assert fit_exponential(h).lambda_ == pytest.approx(0.7, abs=0.001)


def test_exponential_skips_zero_bins():
    h = Histogram({1: 100, 2: 0, 3: 10, 4: 3})
    f = fit_exponential(h, 1, 4)
    assert f.bins_used == 3 and f.zero_bins_skipped == 1


def test_exponential_too_few_bins():
    with pytest.raises(InsufficientBins):
        fit_exponential(Histogram({1: 5}))


@settings(max_examples=60, deadline=None)
@given(st.floats(0.05, 3.0), st.floats(0.0, 10.0), st.floats(1e-3, 1e3))
def test_exponential_exact_recovery_and_scale_invariance(lam, a, scale):
    # integer bins would add rounding noise, so fit noiseless log points
    ns = list(range(1, 10))
    f = ols(ns, [a - lam * n for n in ns])
    assert -f.slope == pytest.approx(lam, abs=1e-6)
    assert f.r_squared == pytest.approx(1.0, abs=1e-9)
    g = ols(ns, [a + math.log(scale) - lam * n for n in ns])
    assert g.slope == pytest.approx(f.slope, abs=1e-9)


# -- power laws ---------------------------------------------------------------------

@pytest.mark.parametrize("name,expected", [
    ("flickr", 0.35), ("wikipedia", 0.96), ("ddc", 0.94), ("delicious", 0.46), ("millionsofgames", 0.59)])
def test_rank_fits_published(name, expected):
    rows = read_rank_tsv(read_lines(APPENDIX / name / "ranks.tsv"))
    xs, counts = [r[0] for r in rows], [r[1] for r in rows]
    f = fit_power_law_points(xs, counts)
    oracle = -polyfit_slope(np.log(xs), np.log(counts))
    assert f.exponent == pytest.approx(oracle, abs=1e-12)
    assert f.exponent == pytest.approx(expected, abs=0.02)


def test_rank_table_fit_matches_point_fit_when_sorted():
    t = tables("delicious")["records_per_tag"]
    f = fit_power_law_ranks(t, 25)
    g = fit_power_law_points(range(1, 26), t.counts)
    assert f.exponent == g.exponent


def test_power_law_exact():
    t = RankTable.from_counts([(f"t{x:02d}", round(1000 * x ** -2)) for x in range(1, 26)])
    assert fit_power_law_ranks(t, 25).exponent == pytest.approx(2.0, abs=0.01)


def test_tail_exact():
    h = Histogram({n: round(1e9 * n ** -6) for n in range(10, 21)})
    assert fit_power_law_tail(h, 10).exponent == pytest.approx(6.0, abs=0.01)


def test_tail_empty():
    with pytest.raises(InsufficientBins):
        fit_power_law_tail(Histogram({1: 100, 2: 50}))


def test_tail_respects_floor():
    h = Histogram({10: 100, 11: 50, 12: 4})
    assert fit_power_law_tail(h, 10, 5).bins_used == 2


@settings(max_examples=40, deadline=None)
@given(st.floats(0.1, 4.0), st.floats(0.0, 12.0))
def test_power_law_exact_recovery(exp, a):
    xs = np.arange(1, 26, dtype=float)
    f = ols(np.log(xs), a - exp * np.log(xs))
    assert -f.slope == pytest.approx(exp, abs=1e-6)


# -- normal ----------------------------------------------------------------------------

@pytest.mark.parametrize("name,mean,sigma", [("ddc", 5.696, 1.362), ("wikipedia", 5.399, 1.265)])
def test_normal_published(name, mean, sigma):
    f = fit_normal(tables(name)["levels"])
    assert f.mean == pytest.approx(mean, abs=5e-4)
    assert f.sigma == pytest.approx(sigma, abs=5e-4)
    assert 0 <= f.ks_p <= 1 and f.ks_statistic > 0


def test_wikipedia_sigma_needs_level0_excluded():
    f = fit_normal(tables("wikipedia")["levels"], exclude_level0=False)
    assert abs(f.sigma - 1.27) > 0.05


def test_normal_single_level():
    with pytest.raises(InsufficientData):
        fit_normal(LevelHistogram({3: 100}))


@settings(max_examples=50, deadline=None)
@given(st.dictionaries(st.integers(1, 30), st.integers(1, 10**6), min_size=2, max_size=15), st.integers(1, 50))
def test_normal_matches_closed_form_and_is_scale_invariant(bins, k):
    vals = np.array(list(bins), float)
    w = np.array(list(bins.values()), float)
    mean = (vals * w).sum() / w.sum()
    sigma = math.sqrt((w * (vals - mean) ** 2).sum() / w.sum())
    f = fit_normal(Histogram(bins))
    assert f.mean == pytest.approx(mean, rel=1e-12, abs=1e-12)
    assert f.sigma == pytest.approx(sigma, rel=1e-10, abs=1e-12)
    g = fit_normal(Histogram({a: b * k for a, b in bins.items()}))
    assert g.mean == pytest.approx(f.mean, rel=1e-12)
    assert g.sigma == pytest.approx(f.sigma, rel=1e-10)


# -- KS ----------------------------------------------------------------------------------

def test_ks_two_point_sample():
    bins = {0: 1, 10: 1}
    d, _ = ks_test(Histogram(bins), 5, 1)
    assert d == ks_bruteforce(bins, 5, 1)
    assert d == pytest.approx(0.5, abs=1e-6)


@pytest.mark.parametrize("seed", range(50))
def test_ks_matches_bruteforce(seed):
    rng = np.random.default_rng(seed)
    keys = rng.choice(np.arange(0, 25), size=int(rng.integers(2, 12)), replace=False)
    bins = {int(k): int(rng.integers(1, 500)) for k in keys}
    mean, sigma = float(rng.uniform(0, 15)), float(rng.uniform(0.3, 5))
    d, p = ks_test(Histogram(bins), mean, sigma)
    assert d == ks_bruteforce(bins, mean, sigma)
    assert 0 <= p <= 1


def test_ks_exact_match_gives_p_one():
    # point mass at 0 against a normal concentrated between the two edges
    d, p = ks_test(Histogram({0: 7}), -0.5, 1e-3)
    assert d == 0.0 and p == 1.0


def test_ks_degenerate_sigma():
    with pytest.raises(DegenerateDistribution):
        ks_test(Histogram({1: 1}), 0, 0)


@pytest.mark.parametrize("x", [0.3, 0.6, 0.9, 1.1, 1.18, 1.3, 2.0, 3.0])
def test_kolmogorov_sf_matches_scipy(x):
    from scipy.special import kolmogorov
    assert kolmogorov_sf(x) == pytest.approx(float(kolmogorov(x)), abs=1e-10)


def test_kolmogorov_sf_edges():
    assert kolmogorov_sf(0) == 1.0
    assert kolmogorov_sf(50) == 0.0


# -- growth -------------------------------------------------------------------------------

def test_growth_constant():
    assert fit_growth([(t, 500) for t in range(6)]).monthly_rate == pytest.approx(0.0, abs=1e-12)


def test_growth_eight_percent_monthly():
    f = fit_growth([(t, 1000 * 1.081 ** t) for t in range(13)])
    assert f.monthly_rate == pytest.approx(0.081, abs=1e-9)


def test_growth_doubling():
    assert fit_growth([(t, 2 ** t) for t in range(8)]).monthly_rate == pytest.approx(1.0, abs=1e-12)


def test_growth_errors():
    with pytest.raises(InsufficientData):
        fit_growth([(0, 1)])
    with pytest.raises(NonPositiveCount):
        fit_growth([(0, 1), (1, 0)])


# -- serialization ---------------------------------------------------------------------------

@pytest.mark.parametrize("obj", [
    ExponentialFit(0.5, 1.0, 0.9, (1, 9), 9, 0),
    PowerLawFit(0.9, 5.0, 0.8, (1.0, 25.0), 25),
    NormalFit(5.4, 1.27, 100, 0.1, 0.5, True),
    GrowthFit(0.081, 1.0, 13),
])
def test_fit_dict_round_trip(obj):
    assert type(obj).from_dict(obj.to_dict()) == obj

"""Regression-style fits for the characteristic distributions.

All parametric fits are ordinary least squares in log space:

* exponential  ``ln count = a - lambda * n``
* power law    ``ln count = a - exponent * ln x``
* growth       ``ln count = a + ln(1 + rate) * t``

The normal fit uses weighted population moments of binned levels and a
one-sample Kolmogorov-Smirnov test.  Because mean and sigma are estimated
from the same data, the reported asymptotic p-value is optimistic
(the Lilliefors situation); it is reported, not relied upon.
"""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass
from typing import Iterable, Mapping, Sequence

import numpy as np
from scipy.special import ndtr

from .metrics import Histogram, LevelHistogram, RankTable

KS_CAVEAT = ("KS p-value uses the asymptotic Kolmogorov distribution with fitted "
             "parameters (Lilliefors setting); treat it as optimistic")


class FitError(ValueError):
    pass


class InsufficientBins(FitError):
    pass


class InsufficientData(FitError):
    pass


class NonPositiveCount(FitError):
    pass


class DegenerateDistribution(FitError):
    pass


@dataclass(frozen=True)
class LinearFit:
    slope: float
    intercept: float
    r_squared: float


def ols(x: Sequence[float], y: Sequence[float]) -> LinearFit:
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if x.size < 2:
        raise InsufficientBins("need at least two points")
    xm, ym = x.mean(), y.mean()
    dx, dy = x - xm, y - ym
    sxx = float(dx @ dx)
    if sxx == 0.0:
        raise InsufficientBins("all x values coincide")
    sxy, syy = float(dx @ dy), float(dy @ dy)
    slope = sxy / sxx
    # a flat series is fitted perfectly by a flat line
    r2 = 1.0 if syy == 0.0 else min(1.0, max(0.0, sxy * sxy / (sxx * syy)))
    return LinearFit(slope, ym - slope * xm, r2)


@dataclass(frozen=True)
class ExponentialFit:
    lambda_: float
    intercept: float
    r_squared: float
    support: tuple[int, int]
    bins_used: int
    zero_bins_skipped: int = 0

    def predict(self, n: float) -> float:
        return math.exp(self.intercept - self.lambda_ * n)

    def to_dict(self) -> dict:
        return {"lambda": self.lambda_, "intercept": self.intercept, "r_squared": self.r_squared,
                "support": list(self.support), "bins_used": self.bins_used,
                "zero_bins_skipped": self.zero_bins_skipped}

    @classmethod
    def from_dict(cls, d: Mapping) -> "ExponentialFit":
        return cls(d["lambda"], d["intercept"], d["r_squared"], tuple(d["support"]),
                   d["bins_used"], d.get("zero_bins_skipped", 0))


@dataclass(frozen=True)
class PowerLawFit:
    exponent: float
    intercept: float
    r_squared: float
    support: tuple[float, float]
    bins_used: int

    def predict(self, x: float) -> float:
        return math.exp(self.intercept) * x ** (-self.exponent)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["support"] = list(self.support)
        return d

    @classmethod
    def from_dict(cls, d: Mapping) -> "PowerLawFit":
        return cls(d["exponent"], d["intercept"], d["r_squared"], tuple(d["support"]), d["bins_used"])


@dataclass(frozen=True)
class NormalFit:
    mean: float
    sigma: float
    n: int
    ks_statistic: float
    ks_p: float
    excluded_level0: bool = True

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: Mapping) -> "NormalFit":
        return cls(**d)


@dataclass(frozen=True)
class GrowthFit:
    monthly_rate: float
    r_squared: float
    points: int

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: Mapping) -> "GrowthFit":
        return cls(**d)


# -- fits ------------------------------------------------------------------------

def fit_exponential(hist: Histogram, nmin: int = 1, nmax: int = 9) -> ExponentialFit:
    """Fit ``count(n) ~ exp(a - lambda n)`` over ``nmin <= n <= nmax``.

    Zero-count bins inside the window are skipped (their log is undefined).
    """
    ns = [n for n in range(nmin, nmax + 1) if hist.bins.get(n, 0) > 0]
    if len(ns) < 2:
        raise InsufficientBins(f"fewer than two non-empty bins in [{nmin}, {nmax}]")
    fit = ols(ns, [math.log(hist.bins[n]) for n in ns])
    return ExponentialFit(-fit.slope, fit.intercept, fit.r_squared, (nmin, nmax), len(ns),
                          (nmax - nmin + 1) - len(ns))


def fit_power_law_points(xs: Iterable[float], counts: Iterable[float]) -> PowerLawFit:
    pts = [(float(x), float(c)) for x, c in zip(xs, counts) if c > 0 and x > 0]
    if len(pts) < 2:
        raise InsufficientBins("need at least two positive points")
    fit = ols([math.log(x) for x, _ in pts], [math.log(c) for _, c in pts])
    return PowerLawFit(-fit.slope, fit.intercept, fit.r_squared,
                       (min(x for x, _ in pts), max(x for x, _ in pts)), len(pts))


def fit_power_law_ranks(table: RankTable, kmax: int = 25) -> PowerLawFit:
    """Rank-frequency fit ``count(rank) ~ rank^-exponent`` over ranks 1..kmax."""
    counts = table.counts[:kmax]
    if len(counts) < 2:
        raise InsufficientBins("need at least two ranked entries")
    return fit_power_law_points(range(1, len(counts) + 1), counts)


def fit_power_law_tail(hist: Histogram, nmin: int = 10, floor: int = 5) -> PowerLawFit:
    pts = [(n, c) for n, c in hist.bins.items() if n >= nmin and n > 0 and c >= floor]
    if len(pts) < 2:
        raise InsufficientBins(f"fewer than two tail bins at n >= {nmin} with count >= {floor}")
    return fit_power_law_points([n for n, _ in pts], [c for _, c in pts])


def _weighted_moments(values: np.ndarray, weights: np.ndarray) -> tuple[float, float]:
    n = weights.sum()
    mean = float((values * weights).sum() / n)
    var = float((weights * (values - mean) ** 2).sum() / n)
    return mean, math.sqrt(var)


def fit_normal(levels: LevelHistogram | Histogram, exclude_level0: bool = True) -> NormalFit:
    """Population mean/sigma of binned levels plus a KS test against the fitted normal."""
    bins = {k: v for k, v in levels.bins.items() if not (exclude_level0 and k == 0)}
    if len(bins) < 2:
        raise InsufficientData("need at least two distinct levels")
    vals = np.array(sorted(bins), dtype=float)
    wts = np.array([bins[int(v)] for v in vals], dtype=float)
    mean, sigma = _weighted_moments(vals, wts)
    d, p = ks_test(Histogram(bins), mean, sigma)
    return NormalFit(mean, sigma, int(wts.sum()), d, p, exclude_level0)


def kolmogorov_sf(x: float) -> float:
    """P(K > x) for the limiting Kolmogorov distribution.

    Uses the alternating series for large ``x`` and the theta-function form
    for small ``x``; both are truncated once terms drop below 1e-12.
    """
    if x <= 0.0:
        return 1.0
    if x < 1.18:
        # K(x) = sqrt(2 pi)/x * sum exp(-(2k-1)^2 pi^2 / (8 x^2))
        s = 0.0
        k = 1
        c = math.pi ** 2 / (8 * x * x)
        while True:
            term = math.exp(-(2 * k - 1) ** 2 * c)
            s += term
            if term < 1e-12:
                break
            k += 1
        return min(1.0, max(0.0, 1.0 - math.sqrt(2 * math.pi) / x * s))
    s = 0.0
    k = 1
    while True:
        term = math.exp(-2 * k * k * x * x)
        s += term if k % 2 else -term
        if term < 1e-12:
            break
        k += 1
    return min(1.0, max(0.0, 2.0 * s))


def ks_edges(hist: Histogram) -> np.ndarray:
    """Evaluation points: every occupied value plus one point below the smallest."""
    keys = np.array(sorted(hist.bins), dtype=float)
    return np.concatenate(([keys[0] - 1.0], keys))


def ks_statistic_from_cdfs(empirical: np.ndarray, model: np.ndarray) -> float:
    return float(np.max(np.abs(np.asarray(empirical) - np.asarray(model))))


def ks_test(hist: Histogram, mean: float, sigma: float) -> tuple[float, float]:
    """One-sample KS of binned integer data against Normal(mean, sigma).

    Both CDFs are compared at the right edge of each occupied bin (the
    value itself, inclusive) and at one point below the first bin.
    """
    if not sigma > 0:
        raise DegenerateDistribution("sigma must be positive")
    total = sum(hist.bins.values())
    if total < 1:
        raise DegenerateDistribution("empty sample")
    edges = ks_edges(hist)
    counts = np.array([0] + [hist.bins[int(k)] for k in edges[1:]], dtype=float)
    emp = np.cumsum(counts) / total
    model = ndtr((edges - mean) / sigma)
    d = ks_statistic_from_cdfs(emp, model)
    return d, kolmogorov_sf(math.sqrt(total) * d)


def fit_growth(series: Iterable[tuple[float, float]]) -> GrowthFit:
    pts = list(series)
    if len(pts) < 2:
        raise InsufficientData("need at least two time points")
    if any(c <= 0 for _, c in pts):
        raise NonPositiveCount("growth fits need positive counts")
    fit = ols([t for t, _ in pts], [math.log(c) for _, c in pts])
    return GrowthFit(math.expm1(fit.slope), fit.r_squared, len(pts))

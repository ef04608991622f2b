"""Finite-sample estimators shared by the experiments.

Everything here reports count-based 95% confidence intervals so the
experiment reports can state how much of an observed discrepancy is
noise.  Distributional comparisons are made on fixed histograms (total
variation), uniformity by chi-square, and macroscopic laws by ordinary
least squares on binned estimates.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import stats as sps

__all__ = [
    "angle_histogram",
    "chi_square_uniform",
    "tv_distance",
    "tv_self_noise",
    "LinearFit",
    "linear_fit",
    "mean_with_ci",
    "msd_curve",
]

TWO_PI = 2.0 * math.pi


def angle_histogram(angles, n_bins: int = 256) -> np.ndarray:
    """Counts of angles wrapped to [0, 2pi) on uniform bins."""
    wrapped = np.mod(np.asarray(angles, dtype=float), TWO_PI)
    counts, _ = np.histogram(wrapped, bins=n_bins, range=(0.0, TWO_PI))
    return counts


def chi_square_uniform(counts) -> tuple[float, float]:
    """Chi-square statistic and p-value against the uniform law."""
    counts = np.asarray(counts, dtype=float)
    stat, p = sps.chisquare(counts)
    return float(stat), float(p)


def tv_distance(counts_p, counts_q) -> float:
    """Total-variation distance between two empirical histograms, in [0, 1]."""
    p = np.asarray(counts_p, dtype=float)
    q = np.asarray(counts_q, dtype=float)
    if p.sum() <= 0 or q.sum() <= 0:
        raise ValueError("histograms must be nonempty")
    return 0.5 * float(np.abs(p / p.sum() - q / q.sum()).sum())


def tv_self_noise(counts_p, counts_q, n_resamples: int = 200,
                  seed: int = 7) -> tuple[float, float]:
    """Sampling noise of the TV estimate: mean and 97.5th percentile of
    the TV between multinomial resamples of the POOLED law.

    This is the distance two histograms of these sizes would show if
    they came from the same distribution; a measured TV is
    distinguishable from zero only above this floor.
    """
    p = np.asarray(counts_p, dtype=float)
    q = np.asarray(counts_q, dtype=float)
    pooled = (p + q) / (p.sum() + q.sum())
    n1, n2 = int(p.sum()), int(q.sum())
    rng = np.random.Generator(np.random.Philox(key=seed))
    tvs = np.empty(n_resamples)
    for i in range(n_resamples):
        a = rng.multinomial(n1, pooled)
        b = rng.multinomial(n2, pooled)
        tvs[i] = tv_distance(a, b)
    return float(tvs.mean()), float(np.quantile(tvs, 0.975))


@dataclass(frozen=True)
class LinearFit:
    slope: float
    intercept: float
    r_squared: float
    slope_se: float

    @property
    def slope_ci(self) -> tuple[float, float]:
        return self.slope - 1.96 * self.slope_se, self.slope + 1.96 * self.slope_se

    def value(self, x):
        return self.intercept + self.slope * np.asarray(x, dtype=float)


def linear_fit(x, y, se=None) -> LinearFit:
    """Least squares y = a + b x; weighted by 1/se^2 when se is given.

    The slope standard error comes from the weights when given,
    otherwise from the residual variance.
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if len(x) < 3:
        raise ValueError("need at least 3 points")
    if se is not None:
        w = 1.0 / np.asarray(se, dtype=float) ** 2
    else:
        w = np.ones_like(x)
    sw = w.sum()
    mx = (w * x).sum() / sw
    my = (w * y).sum() / sw
    sxx = (w * (x - mx) ** 2).sum()
    sxy = (w * (x - mx) * (y - my)).sum()
    slope = sxy / sxx
    intercept = my - slope * mx
    resid = y - (intercept + slope * x)
    ss_res = float((w * resid**2).sum())
    ss_tot = float((w * (y - my) ** 2).sum())
    r2 = 1.0 - ss_res / ss_tot if ss_tot > 0 else 1.0
    if se is not None:
        slope_se = math.sqrt(1.0 / sxx)
    else:
        dof = max(len(x) - 2, 1)
        slope_se = math.sqrt(ss_res / dof / sxx)
    return LinearFit(float(slope), float(intercept), r2, float(slope_se))


def mean_with_ci(samples) -> tuple[float, float]:
    """Sample mean and its 95% half-width."""
    a = np.asarray(samples, dtype=float)
    if a.size < 2:
        return float(a.mean()) if a.size else math.nan, math.inf
    return float(a.mean()), 1.96 * float(a.std(ddof=1)) / math.sqrt(a.size)


def msd_curve(times, positions) -> tuple[np.ndarray, np.ndarray]:
    """Mean square displacement and 95% half-widths from an ensemble.

    positions: array (n_paths, n_times, 2) of displacements from the
    start (or absolute positions with common start at the origin).
    """
    pos = np.asarray(positions, dtype=float)
    sq = np.einsum("ptk,ptk->pt", pos, pos)
    msd = sq.mean(axis=0)
    half = 1.96 * sq.std(axis=0, ddof=1) / math.sqrt(pos.shape[0])
    return msd, half

"""Estimator sanity: histograms, TV, chi-square, least squares."""

import math

import numpy as np
import pytest

from lorentzlab.stats import (
    angle_histogram,
    chi_square_uniform,
    linear_fit,
    mean_with_ci,
    msd_curve,
    tv_distance,
    tv_self_noise,
)


class TestHistogramsAndTV:
    def test_angle_histogram_wraps(self):
        counts = angle_histogram([0.1, 0.1 + 2 * math.pi, -0.2], n_bins=8)
        assert counts.sum() == 3
        assert counts[0] == 2  # both 0.1 copies in the first bin

    def test_tv_identical_zero(self):
        h = np.array([5, 3, 2])
        assert tv_distance(h, h) == 0.0

    def test_tv_disjoint_one(self):
        assert tv_distance([10, 0], [0, 10]) == 1.0

    def test_tv_scale_invariant(self):
        a, b = np.array([4, 6, 10]), np.array([2, 3, 5])
        assert tv_distance(a, b) == pytest.approx(0.0, abs=1e-15)

    def test_tv_empty_rejected(self):
        with pytest.raises(ValueError):
            tv_distance([0, 0], [1, 2])

    def test_self_noise_floor_scales(self):
        rng = np.random.default_rng(0)
        h1 = rng.multinomial(2000, np.full(32, 1 / 32))
        h2 = rng.multinomial(2000, np.full(32, 1 / 32))
        mean_small, hi_small = tv_self_noise(h1, h2, seed=1)
        h3 = rng.multinomial(50_000, np.full(32, 1 / 32))
        h4 = rng.multinomial(50_000, np.full(32, 1 / 32))
        mean_big, _ = tv_self_noise(h3, h4, seed=1)
        assert mean_big < mean_small
        assert hi_small > mean_small
        # the measured self TV sits inside the predicted band
        assert tv_distance(h1, h2) < 2 * hi_small


class TestChiSquare:
    def test_uniform_accepts(self):
        rng = np.random.default_rng(3)
        counts = angle_histogram(rng.uniform(0, 2 * math.pi, 20_000), 32)
        _, p = chi_square_uniform(counts)
        assert p > 0.01

    def test_concentrated_rejects(self):
        counts = angle_histogram(np.full(1000, 0.3), 32)
        _, p = chi_square_uniform(counts)
        assert p < 1e-10


class TestLinearFit:
    def test_exact_line(self):
        x = np.linspace(0, 1, 9)
        fit = linear_fit(x, 2.0 - 0.5 * x)
        assert fit.slope == pytest.approx(-0.5, abs=1e-12)
        assert fit.intercept == pytest.approx(2.0, abs=1e-12)
        assert fit.r_squared == pytest.approx(1.0, abs=1e-12)

    def test_weighted_recovers_slope(self):
        rng = np.random.default_rng(8)
        x = np.linspace(0, 1, 40)
        se = np.full_like(x, 0.05)
        y = 1.0 + 3.0 * x + rng.normal(0, 0.05, x.size)
        fit = linear_fit(x, y, se)
        lo, hi = fit.slope_ci
        assert lo < 3.0 < hi

    def test_slope_ci_covers_noise(self):
        rng = np.random.default_rng(9)
        hits = 0
        for i in range(100):
            x = np.linspace(0, 1, 12)
            y = rng.normal(0, 1, 12)
            fit = linear_fit(x, y)
            lo, hi = fit.slope_ci
            hits += lo <= 0.0 <= hi
        assert hits >= 85  # 95% nominal coverage

    def test_needs_three_points(self):
        with pytest.raises(ValueError):
            linear_fit([0, 1], [0, 1])


class TestSmallHelpers:
    def test_mean_with_ci(self):
        m, hw = mean_with_ci([1.0, 2.0, 3.0, 4.0])
        assert m == pytest.approx(2.5)
        assert hw > 0

    def test_msd_curve_ballistic(self):
        # straight motion at speed 1: msd = t^2 exactly, zero spread
        times = np.linspace(0, 2, 5)
        pos = np.zeros((7, 5, 2))
        pos[:, :, 0] = times
        msd, hw = msd_curve(times, pos)
        assert np.allclose(msd, times**2, atol=1e-12)
        assert np.allclose(hw, 0.0, atol=1e-12)

"""Stream derivation: determinism, independence, cell hashing."""

import math

import numpy as np

from lorentzlab.rng import HashStream, mix_key, rng_stream, splitmix64


class TestRngStream:
    def test_same_inputs_same_stream(self):
        a = rng_stream(12345, 7).random(1000)
        b = rng_stream(12345, 7).random(1000)
        assert np.array_equal(a, b)

    def test_different_indices_differ(self):
        a = rng_stream(12345, 0).random(1000)
        b = rng_stream(12345, 1).random(1000)
        assert not np.array_equal(a, b)

    def test_different_master_seeds_differ(self):
        a = rng_stream(1, 0).random(1000)
        b = rng_stream(2, 0).random(1000)
        assert not np.array_equal(a, b)

    def test_streams_uncorrelated(self):
        n = 1_000_000
        a = rng_stream(9, 0).random(n)
        b = rng_stream(9, 1).random(n)
        corr = np.corrcoef(a, b)[0, 1]
        assert abs(corr) < 3.0 / math.sqrt(n)


class TestHashStream:
    def test_keyed_determinism(self):
        s1 = HashStream(3, 5, 7)
        s2 = HashStream(3, 5, 7)
        assert [s1.uniform() for _ in range(50)] == [s2.uniform() for _ in range(50)]

    def test_uniform_range_and_mean(self):
        s = HashStream(11)
        draws = np.array([s.uniform() for _ in range(50_000)])
        assert draws.min() >= 0.0 and draws.max() < 1.0
        assert abs(draws.mean() - 0.5) < 3.0 * draws.std() / math.sqrt(draws.size)

    def test_poisson_moments(self):
        s = HashStream(13)
        lam = 2.5
        counts = np.array([s.poisson(lam) for _ in range(40_000)])
        assert abs(counts.mean() - lam) < 3.0 * counts.std() / math.sqrt(counts.size)
        assert abs(counts.var() - lam) < 0.1

    def test_poisson_large_mean_split(self):
        s = HashStream(17)
        counts = np.array([s.poisson(200.0) for _ in range(3000)])
        assert abs(counts.mean() - 200.0) < 3.0 * counts.std() / math.sqrt(counts.size)

    def test_poisson_zero(self):
        assert HashStream(1).poisson(0.0) == 0

    def test_mix_key_order_sensitive(self):
        assert mix_key(1, 2) != mix_key(2, 1)
        assert splitmix64(0) != splitmix64(1)

import math
import unittest

import numpy as np
from scipy import special, stats

from relkac.errors import DomainError, GridContractError, SamplerError
from relkac.model import ModelParams, exponential_moment, laplace_exponent, mean_rate, variance_rate
from relkac.sampler import (
    RngStream,
    SamplerSettings,
    deterministic_subordinator_path,
    sample_brownian,
    sample_poisson_spin,
    sample_stable_increment,
    sample_subordinator_path,
    sample_tempered_increment,
    sample_tilted_batch,
    split_count,
)
from relkac.stats import RunningMoments

CLASSICAL = ModelParams.classical()
N = 100_000


class TestRngStream(unittest.TestCase):

    def test_streams_are_reproducible_and_distinct(self):
        a = RngStream(42, 7).generator().random(5)
        b = RngStream(42, 7).generator().random(5)
        c = RngStream(42, 8).generator().random(5)
        d = RngStream(43, 7).generator().random(5)
        np.testing.assert_array_equal(a, b)
        self.assertFalse(np.array_equal(a, c))
        self.assertFalse(np.array_equal(a, d))


class TestStableIncrement(unittest.TestCase):

    def test_levy_distribution(self):
        """
        rho = 1/2 has CDF erfc(1 / (2 sqrt(x))).
        """
        draws = sample_stable_increment(0.5, 1.0, 1.0, RngStream(1, 0), size=N)
        distance = stats.kstest(draws, lambda x: special.erfc(0.5 / np.sqrt(x))).statistic
        self.assertLess(distance, 0.01)

    def test_laplace_at_one(self):
        draws = sample_stable_increment(0.3, 1.0, 1.0, RngStream(2, 0), size=N)
        moments = RunningMoments.from_samples(np.exp(-draws))
        self.assertLess(abs(moments.mean - math.exp(-1.0)), 4.0 * moments.stderr)

    def test_small_step_concentrates_at_zero(self):
        draws = sample_stable_increment(0.5, 1.0, 1e-6, RngStream(15, 0), size=10_000)
        self.assertLessEqual(int(np.sum(draws > 0.1)), 1)

    def test_domain(self):
        with self.assertRaises(DomainError):
            sample_stable_increment(1.0, 1.0, 1.0, RngStream(0, 0))
        with self.assertRaises(DomainError):
            sample_stable_increment(0.5, 1.0, 0.0, RngStream(0, 0))

    def test_scalar_draw(self):
        self.assertIsInstance(sample_stable_increment(0.5, 1.0, 1.0, RngStream(0, 0)), float)


class TestTemperedIncrement(unittest.TestCase):

    def test_laplace_identity(self):
        draws = sample_tempered_increment(CLASSICAL, 1.0, RngStream(3, 0), size=N)
        for u in (0.5, 1.0, 2.0):
            moments = RunningMoments.from_samples(np.exp(-u * draws))
            self.assertLess(abs(moments.mean - math.exp(-laplace_exponent(CLASSICAL, u))), 4.0 * moments.stderr)

    def test_mean_and_variance(self):
        params = ModelParams(alpha=1.5, beta=0.5, gamma=1.5, m=1.0, c=2.0)
        draws = sample_tempered_increment(params, 1.0, RngStream(4, 0), size=N)
        mean = RunningMoments.from_samples(draws)
        self.assertLess(abs(mean.mean - mean_rate(params, 1.0)), 4.0 * mean.stderr)
        spread = RunningMoments.from_samples((draws - mean_rate(params, 1.0)) ** 2)
        self.assertLess(abs(spread.mean - variance_rate(params, 1.0)), 5.0 * spread.stderr)

    def test_exponential_moment(self):
        u = CLASSICAL.theta / 2.0
        draws = sample_tempered_increment(CLASSICAL, 1.0, RngStream(5, 0), size=N)
        moments = RunningMoments.from_samples(np.exp(u * draws))
        self.assertLess(abs(moments.mean - exponential_moment(CLASSICAL, u, 1.0)), 5.0 * moments.stderr)

    def test_splitting(self):
        params = CLASSICAL.with_c(4.0)
        k = split_count(params, 1.0)
        self.assertEqual(k, math.ceil(16.0 / math.log(10.0)))
        self.assertGreaterEqual(math.exp(-params.rest_energy / k), 0.1)
        self.assertEqual(split_count(CLASSICAL, 0.01), 1)

    def test_large_c_increments_follow_laplace(self):
        params = CLASSICAL.with_c(8.0)
        draws = sample_tempered_increment(params, 1.0, RngStream(6, 0), size=20_000)
        moments = RunningMoments.from_samples(np.exp(-draws))
        self.assertLess(abs(moments.mean - math.exp(-laplace_exponent(params, 1.0))), 4.0 * moments.stderr)

    def test_split_draws_are_consistent(self):
        """
        One split draw over dt and the sum of two over dt/2 share the law exp(-dt Psi_c).
        """
        params = CLASSICAL.with_c(4.0)
        self.assertNotEqual(split_count(params, 1.0), 2 * split_count(params, 0.5))
        whole = sample_tempered_increment(params, 1.0, RngStream(40, 0), size=20_000)
        halves = (
            sample_tempered_increment(params, 0.5, RngStream(40, 1), size=20_000)
            + sample_tempered_increment(params, 0.5, RngStream(40, 2), size=20_000)
        )
        self.assertGreater(stats.ks_2samp(whole, halves).pvalue, 1e-3)
        for u in (0.5, 2.0):
            moments = RunningMoments.from_samples(np.exp(-u * halves))
            self.assertLess(abs(moments.mean - math.exp(-laplace_exponent(params, u))), 4.0 * moments.stderr)

    def test_acceptance_rate(self):
        count = 20_000
        _, proposals = sample_tilted_batch(CLASSICAL, 1.0, count, RngStream(7, 0))
        p = math.exp(-CLASSICAL.rest_energy)
        se = math.sqrt(p * (1.0 - p) / proposals)
        self.assertLess(abs(count / proposals - p), 5.0 * se)

    def test_iteration_cap(self):
        with self.assertRaises(SamplerError):
            sample_tilted_batch(CLASSICAL, 60.0, 50, RngStream(8, 0), max_rounds=1)

    def test_zero_step(self):
        self.assertEqual(sample_tempered_increment(CLASSICAL, 0.0, RngStream(0, 0)), 0.0)
        np.testing.assert_array_equal(sample_tempered_increment(CLASSICAL, 0.0, RngStream(0, 0), size=3), np.zeros(3))
        with self.assertRaises(DomainError):
            sample_tempered_increment(CLASSICAL, -1.0, RngStream(0, 0))

    def test_settings_validation(self):
        with self.assertRaises(DomainError):
            SamplerSettings(split_acceptance=1.0)


class TestSubordinatorPath(unittest.TestCase):

    def test_path_structure(self):
        path = sample_subordinator_path(CLASSICAL, 2.0, 16, RngStream(9, 3))
        self.assertEqual(path.outer_times.size, 17)
        self.assertEqual(path.cumulative[0], 0.0)
        self.assertTrue(np.all(path.increments >= 0.0))
        self.assertAlmostEqual(path.horizon, float(np.sum(path.increments)), delta=1e-12)
        self.assertEqual(path.t, 2.0)

    def test_path_is_reproducible(self):
        a = sample_subordinator_path(CLASSICAL, 1.0, 8, RngStream(10, 5))
        b = sample_subordinator_path(CLASSICAL, 1.0, 8, RngStream(10, 5))
        np.testing.assert_array_equal(a.cumulative, b.cumulative)

    def test_horizon_variance(self):
        gen = RngStream(11, 0).generator()
        horizons = np.array([sample_subordinator_path(CLASSICAL, 1.0, 4, gen).horizon for _ in range(20_000)])
        spread = RunningMoments.from_samples((horizons - mean_rate(CLASSICAL, 1.0)) ** 2)
        self.assertLess(abs(spread.mean - variance_rate(CLASSICAL, 1.0)), 5.0 * spread.stderr)

    def test_deterministic_time_change(self):
        path = deterministic_subordinator_path(0.5, 2.0, 4)
        np.testing.assert_allclose(path.cumulative, [0.0, 0.25, 0.5, 0.75, 1.0])
        self.assertEqual(path.horizon, 1.0)


class TestBrownian(unittest.TestCase):

    def test_mean_displacement(self):
        gen = RngStream(12, 0).generator()
        ends = np.array([sample_brownian(1, [0.0, 0.5, 1.0], [0.3], gen).positions[-1, 0] for _ in range(20_000)])
        moments = RunningMoments.from_samples(ends - 0.3)
        self.assertLess(abs(moments.mean), 4.0 * moments.stderr)
        self.assertAlmostEqual(moments.variance, 1.0, delta=0.05)

    def test_grid_contract(self):
        path = sample_brownian(2, [0.0, 0.25, 1.0], [0.0, 0.0], RngStream(0, 0))
        np.testing.assert_array_equal(path.positions[0], [0.0, 0.0])
        np.testing.assert_array_equal(path.indices_of([0.25, 1.0]), [1, 2])
        with self.assertRaises(GridContractError):
            path.indices_of([0.5])
        with self.assertRaises(DomainError):
            sample_brownian(1, [0.1, 0.2], [0.0], RngStream(0, 0))
        with self.assertRaises(DomainError):
            sample_brownian(1, [0.0, 0.2, 0.2], [0.0], RngStream(0, 0))

    def test_zero_dimension(self):
        path = sample_brownian(0, [0.0, 1.0], [], RngStream(0, 0))
        self.assertEqual(path.positions.shape, (2, 0))


class TestSpin(unittest.TestCase):

    def test_zero_horizon(self):
        spin = sample_poisson_spin(0.0, -1, RngStream(0, 0))
        self.assertEqual(spin.jump_times.size, 0)
        self.assertEqual(int(spin.spin_at(0.0)), -1)

    def test_mean_jump_count(self):
        gen = RngStream(13, 0).generator()
        counts = np.array([sample_poisson_spin(2.0, 1, gen).jump_times.size for _ in range(20_000)])
        moments = RunningMoments.from_samples(counts)
        self.assertLess(abs(moments.mean - 2.0), 4.0 * moments.stderr)

    def test_spin_flips_at_jumps(self):
        spin = sample_poisson_spin(3.0, 1, RngStream(14, 0))
        for j, s in enumerate(spin.jump_times):
            self.assertEqual(int(spin.spin_at(s)), (-1) ** (j + 1))
        self.assertTrue(np.all(np.diff(spin.jump_times) >= 0.0))
        flipped = spin.with_initial_spin(-1)
        self.assertEqual(int(flipped.spin_at(0.0)), -1)

    def test_mean_spin_decays(self):
        """
        E[spin at h] = initial * exp(-2h) for the rate-one flip process.
        """
        gen = RngStream(41, 0).generator()
        for h in (0.3, 1.0):
            spins = np.array([float(sample_poisson_spin(h, -1, gen).spin_at(h)) for _ in range(20_000)])
            moments = RunningMoments.from_samples(spins)
            self.assertLess(abs(moments.mean + math.exp(-2.0 * h)), 4.0 * moments.stderr)

    def test_domain(self):
        with self.assertRaises(DomainError):
            sample_poisson_spin(-1.0, 1, RngStream(0, 0))
        with self.assertRaises(DomainError):
            sample_poisson_spin(1.0, 0, RngStream(0, 0))


if __name__ == "__main__":

    unittest.main()

"""Energy goodness-of-fit statistic against N(0, I_k).

Expected-distance values are validated three independent ways: exact
closed forms at the origin, the scalar-case identity
E|a - Z| = a(2 Phi(a) - 1) + 2 phi(a) built from math.erf, and seeded
Monte Carlo. The simulated null quantiles frozen below come from a
separate 2000-replicate run (seed 987654321, numpy default_rng).
"""

import math

import numpy as np
import pytest
from scipy.spatial.distance import cdist

from npcit import (
    energy_statistic,
    expected_distance_to_std_normal,
    make_stream,
    null_pair_expectation,
    SeedSpec,
)

SQRT_2_OVER_PI = math.sqrt(2.0 / math.pi)          # E|Z| in one dimension
MEAN_NORM_3D = 2.0 * math.sqrt(2.0) / math.sqrt(math.pi)   # E||Z|| in R^3
NULL_PAIR_1D = 2.0 / math.sqrt(math.pi)
NULL_PAIR_3D = 4.0 / math.sqrt(math.pi)

# Simulated null of the statistic for N(0, I_2) samples:
#   n=100: median 1.5227, 0.999 quantile 6.83  (2000 replicates)
#   n=1000: median 1.5172, 0.999 quantile 6.42 (1000 replicates)
# The upper reference below is a slightly conservative envelope of both.
NULL_MEDIAN_N100_K2 = 1.52
NULL_Q999_K2_UPPER = 6.9


def exact_scalar_expected_distance(a: float) -> float:
    """E|a - Z| for scalar a via the erf-based closed form."""
    a = abs(a)
    phi = math.exp(-0.5 * a * a) / math.sqrt(2.0 * math.pi)
    big_phi = 0.5 * (1.0 + math.erf(a / math.sqrt(2.0)))
    return a * (2.0 * big_phi - 1.0) + 2.0 * phi


class TestExpectedDistance:
    def test_origin_1d(self):
        assert expected_distance_to_std_normal([0.0]) == pytest.approx(
            SQRT_2_OVER_PI, rel=1e-12)

    def test_origin_3d(self):
        assert expected_distance_to_std_normal([0.0, 0.0, 0.0]) == pytest.approx(
            MEAN_NORM_3D, rel=1e-12)

    def test_scalar_identity_both_routes(self):
        # a=8 in 1d has ||a||^2 = 64 > 51, exercising the quadrature branch
        for a in [0.0, 0.5, 1.0, 2.0, 5.0, 8.0]:
            want = exact_scalar_expected_distance(a)
            assert expected_distance_to_std_normal([a]) == pytest.approx(want, rel=1e-9)

    def test_unit_point_3d_monte_carlo(self):
        rng = np.random.default_rng(31337)
        draws = rng.standard_normal((2_000_000, 3))
        draws[:, 0] -= 1.0
        dists = np.sqrt(np.einsum("ij,ij->i", draws, draws))
        mc, se = dists.mean(), dists.std(ddof=1) / math.sqrt(len(dists))
        got = expected_distance_to_std_normal([1.0, 0.0, 0.0])
        assert abs(got - mc) < max(4.0 * se, 3e-3)

    def test_scalar_with_dim(self):
        want = expected_distance_to_std_normal([2.0, 0.0, 0.0, 0.0, 0.0])
        assert expected_distance_to_std_normal(2.0, dim=5) == pytest.approx(want, rel=1e-12)

    def test_series_quadrature_agreement(self):
        # straddle the auto switchover ||a||^2 = m + 50 from both sides
        rng = np.random.default_rng(4242)
        for m in [1, 2, 3, 5]:
            lam = rng.uniform(m + 40.0, m + 60.0, size=25)
            for norm_sq in lam:
                a = math.sqrt(norm_sq)
                s = expected_distance_to_std_normal(a, dim=m, method="series")
                q = expected_distance_to_std_normal(a, dim=m, method="quadrature")
                assert s == pytest.approx(q, rel=1e-7)

    def test_domain(self):
        with pytest.raises(ValueError):
            expected_distance_to_std_normal([1.0], dim=0)
        with pytest.raises(ValueError):
            expected_distance_to_std_normal([math.nan])
        with pytest.raises(ValueError):
            expected_distance_to_std_normal([1.0], method="magic")


class TestNullPairExpectation:
    def test_known_values(self):
        assert null_pair_expectation(1) == pytest.approx(NULL_PAIR_1D, rel=1e-12)
        assert null_pair_expectation(3) == pytest.approx(NULL_PAIR_3D, rel=1e-12)

    def test_monte_carlo_1d(self):
        rng = np.random.default_rng(2718)
        pairs = rng.standard_normal((2_000_000, 2))
        mc = np.abs(pairs[:, 0] - pairs[:, 1]).mean()
        assert null_pair_expectation(1) == pytest.approx(mc, abs=3e-3)

    def test_scaled_origin_identity(self):
        for k in [1, 2, 3, 5, 7]:
            want = math.sqrt(2.0) * expected_distance_to_std_normal(0.0, dim=k)
            assert null_pair_expectation(k) == pytest.approx(want, rel=1e-12)

    def test_domain(self):
        with pytest.raises(ValueError):
            null_pair_expectation(0)


class TestEnergyStatistic:
    def test_single_point_at_origin(self):
        # 2 E|0 - Z| - 0 - E|Z - Z'| = 2 sqrt(2/pi) - 2/sqrt(pi)
        want = 2.0 * SQRT_2_OVER_PI - NULL_PAIR_1D
        res = energy_statistic(np.array([[0.0]]))
        assert res.statistic == pytest.approx(want, rel=1e-12)
        assert res.mean_pairwise_distance == 0.0

    def test_component_identity(self):
        rng = make_stream(SeedSpec(55))
        t = rng.standard_normal((137, 3)) * 1.3 + 0.2
        res = energy_statistic(t)
        recon = res.n * (2.0 * res.mean_expected_distance
                         - res.mean_pairwise_distance
                         - res.null_pair_expectation)
        assert res.statistic == pytest.approx(recon, rel=1e-9)
        assert res.null_pair_expectation == pytest.approx(null_pair_expectation(3), rel=1e-12)

    def test_pairwise_mean_matches_cdist(self):
        rng = make_stream(SeedSpec(56))
        for n in [1, 2, 300, 700]:
            t = rng.standard_normal((n, 2))
            res = energy_statistic(t)
            want = cdist(t, t).sum() / (n * n)
            assert res.mean_pairwise_distance == pytest.approx(want, rel=1e-12, abs=1e-12)

    def test_null_sample_large_n(self):
        t = make_stream(SeedSpec(77)).standard_normal((10_000, 2))
        res = energy_statistic(t)
        assert res.statistic > 0.0
        assert res.statistic < NULL_Q999_K2_UPPER

    def test_far_shift_dwarfs_null_scale(self):
        t = make_stream(SeedSpec(78)).standard_normal((100, 2)) + 5.0
        res = energy_statistic(t)
        assert res.statistic > 50.0 * NULL_MEDIAN_N100_K2

    def test_location_sensitivity(self):
        wins = 0
        for rep in range(200):
            rng = make_stream(SeedSpec(600, rep))
            base = rng.standard_normal((200, 2))
            if energy_statistic(base + 0.5).statistic > energy_statistic(base).statistic:
                wins += 1
        assert wins >= 190

    def test_nonnegative_1000_random_cases(self):
        rng = make_stream(SeedSpec(57))
        for _ in range(1000):
            n = int(rng.integers(1, 40))
            k = int(rng.integers(1, 5))
            scale = float(rng.uniform(0.05, 8.0))
            t = rng.standard_normal((n, k)) * scale + rng.uniform(-3, 3)
            assert energy_statistic(t).statistic >= -1e-9

    def test_rotation_invariance_1000_random_cases(self):
        rng = make_stream(SeedSpec(58))
        for _ in range(1000):
            k = int(rng.integers(2, 5))
            n = int(rng.integers(2, 25))
            t = rng.standard_normal((n, k)) * rng.uniform(0.5, 2.0)
            q, _ = np.linalg.qr(rng.standard_normal((k, k)))
            a = energy_statistic(t).statistic
            b = energy_statistic(t @ q.T).statistic
            assert b == pytest.approx(a, rel=1e-8, abs=1e-10)

    def test_rejects_empty_and_nonfinite(self):
        with pytest.raises(ValueError):
            energy_statistic(np.empty((0, 2)))
        with pytest.raises(ValueError):
            energy_statistic(np.array([[np.nan, 0.0]]))

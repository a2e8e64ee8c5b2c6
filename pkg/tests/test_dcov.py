"""Distance covariance, its permutation test, and the residual-pair version.

The statistic is cross-checked against a literal double-centering
recomputation; the calibration checks are seeded frequency experiments at
the scales their tolerances assume.
"""

import numpy as np
import pytest
from scipy.spatial.distance import cdist

from npcit import (
    SeedSpec,
    distance_covariance,
    gaussian_latent_oracles,
    gen_gaussian_latent,
    gen_modulo_counterexample,
    make_stream,
    partial_dcov,
    permutation_independence_test,
)
from npcit.kernel_cde import fit


def dcov_by_hand(a, b):
    """Literal definition: mean of the elementwise product of the two
    double-centered distance matrices."""
    a = np.atleast_2d(np.asarray(a, float))
    b = np.atleast_2d(np.asarray(b, float))
    if a.shape[0] == 1:
        a, b = a.T, b.T
    out = []
    for m in (cdist(a, a), cdist(b, b)):
        out.append(m - m.mean(0) - m.mean(1)[:, None] + m.mean())
    return float((out[0] * out[1]).mean())


class TestStatistic:
    def test_matches_literal_definition(self):
        rng = make_stream(SeedSpec(41))
        for _ in range(50):
            n = int(rng.integers(3, 40))
            p, q = int(rng.integers(1, 4)), int(rng.integers(1, 4))
            a = rng.standard_normal((n, p))
            b = rng.standard_normal((n, q)) + 0.5 * a[:, :1]
            assert distance_covariance(a, b) == pytest.approx(
                dcov_by_hand(a, b), rel=1e-12, abs=1e-15)

    def test_constant_input_is_zero(self):
        a = np.ones((30, 2))
        b = make_stream(SeedSpec(42)).standard_normal((30, 1))
        assert distance_covariance(a, b) == 0.0

    def test_self_case_positive(self):
        a = make_stream(SeedSpec(43)).standard_normal((50, 1))
        v = distance_covariance(a, a)
        assert v > 0.0
        assert v == pytest.approx(dcov_by_hand(a, a), rel=1e-12)

    def test_length_mismatch(self):
        with pytest.raises(ValueError):
            distance_covariance(np.zeros((5, 1)), np.zeros((6, 1)))

    def test_invariances_1000_random_cases(self):
        # shift invariance and |c| scale equivariance in one sweep
        rng = make_stream(SeedSpec(44))
        for _ in range(1000):
            n = int(rng.integers(3, 25))
            p = int(rng.integers(1, 4))
            a = rng.standard_normal((n, p))
            b = rng.standard_normal((n, 2))
            v = distance_covariance(a, b)
            shifted = distance_covariance(a + rng.uniform(-5, 5, size=p), b)
            assert shifted == pytest.approx(v, rel=1e-12, abs=1e-15)
            c = float(rng.uniform(-3, 3))
            scaled = distance_covariance(c * a, b)
            assert scaled == pytest.approx(abs(c) * v, rel=1e-12, abs=1e-15)
            q, _ = np.linalg.qr(rng.standard_normal((p, p)))
            rotated = distance_covariance(a @ q.T, b)
            assert rotated == pytest.approx(v, rel=1e-12, abs=1e-15)


class TestPermutationTest:
    def test_determinism(self):
        rng = make_stream(SeedSpec(45))
        a = rng.uniform(size=(80, 1))
        b = rng.uniform(size=(80, 1))
        r1 = permutation_independence_test(a, b, permutations=199, seed=SeedSpec(9, 9))
        r2 = permutation_independence_test(a, b, permutations=199, seed=SeedSpec(9, 9))
        assert r1.p_value == r2.p_value
        assert r1.statistic == r2.statistic

    def test_perfect_dependence_minimal_p(self):
        a = make_stream(SeedSpec(46)).standard_normal((100, 1))
        r = permutation_independence_test(a, a.copy(), permutations=199, seed=SeedSpec(10))
        assert r.p_value == pytest.approx(1.0 / 200.0)

    def test_minimum_permutations_enforced(self):
        a = np.zeros((5, 1))
        with pytest.raises(ValueError):
            permutation_independence_test(a, a, permutations=50, seed=SeedSpec(0))

    def test_level_calibration_500_runs(self):
        rejections = 0
        for rep in range(500):
            rng = make_stream(SeedSpec(700, rep))
            a = rng.uniform(size=(200, 1))
            b = rng.uniform(size=(200, 1))
            r = permutation_independence_test(a, b, permutations=999,
                                              seed=SeedSpec(701, rep))
            rejections += r.p_value <= 0.05
        assert abs(rejections / 500.0 - 0.05) <= 0.03

    def test_independent_gaussians_rarely_exceed_q99(self):
        # p > 0.01 means the observed statistic sits below the 0.99
        # permutation quantile
        below = 0
        for rep in range(200):
            rng = make_stream(SeedSpec(702, rep))
            a = rng.standard_normal((1000, 1))
            b = rng.standard_normal((1000, 1))
            r = permutation_independence_test(a, b, permutations=199,
                                              seed=SeedSpec(703, rep))
            below += r.p_value > 0.01
        assert below >= 190


class TestPartialDcov:
    def test_oracle_level_at_n500(self):
        fx, fy, _ = gaussian_latent_oracles(sigma_w=0.0)
        rejections = 0
        for rep in range(200):
            ds = gen_gaussian_latent(500, d=1, sigma_w=0.0, seed=SeedSpec(800, rep))
            r = partial_dcov(ds, fx, fy, permutations=199, seed=SeedSpec(801, rep))
            rejections += r.p_value <= 0.05
        assert abs(rejections / 200.0 - 0.05) <= 0.045

    def test_oracle_power_at_sigma025(self):
        fx, fy, _ = gaussian_latent_oracles(sigma_w=0.25)
        rejections = 0
        for rep in range(200):
            ds = gen_gaussian_latent(500, d=1, sigma_w=0.25, seed=SeedSpec(802, rep))
            r = partial_dcov(ds, fx, fy, permutations=199, seed=SeedSpec(803, rep))
            rejections += r.p_value <= 0.05
        assert rejections / 200.0 >= 0.9

    def test_counterexample_blindness(self):
        # pairwise-independent construction: the residual-pair test has no
        # power here even though conditional dependence is real
        rejections = 0
        for rep in range(100):
            ds = gen_modulo_counterexample(200, seed=SeedSpec(804, rep))
            fx = fit(ds.x, ds.z)
            fy = fit(ds.y, ds.z)
            r = partial_dcov(ds, fx, fy, permutations=199, seed=SeedSpec(805, rep))
            rejections += r.p_value <= 0.05
        assert rejections / 100.0 <= 0.12

"""Scenario generators and their exact conditional-law oracles.

Moment tolerances are CLT bands at the stated sample sizes. The latent
scenario's conditional law is known in closed form (X | Z=z is
N(z_1, sigma_w^2 + sigma_e^2)), which pins the oracle models exactly.
"""

import math

import numpy as np
import pytest

from npcit import (
    GaussianOracleChain,
    SCENARIOS,
    SeedSpec,
    gaussian_latent_oracles,
    gaussian_oracle_residual,
    gen_gaussian_latent,
    gen_modulo_counterexample,
    gen_pairwise_gaussian,
    generate,
    ks_uniform_distance,
    make_scenario,
    make_stream,
    std_normal_cdf,
)


class TestGaussianLatent:
    def test_determinism(self):
        a = gen_gaussian_latent(100, d=2, sigma_w=0.1, seed=SeedSpec(50))
        b = gen_gaussian_latent(100, d=2, sigma_w=0.1, seed=SeedSpec(50))
        assert np.array_equal(a.x, b.x) and np.array_equal(a.z, b.z)

    def test_shapes_and_names(self):
        ds = gen_gaussian_latent(40, d=3, seed=SeedSpec(51))
        assert ds.z.shape == (40, 3)
        assert ds.y is not None
        assert ds.column_names == ("x", "y", "z1", "z2", "z3")

    def test_noise_terms_uncorrelated_when_null(self):
        # corr SE is 1/sqrt(n) = 0.005, so 0.03 is a 6-sigma bound
        ds = gen_gaussian_latent(40_000, d=1, sigma_w=0.0, seed=SeedSpec(52))
        ex = ds.x - ds.z[:, 0]
        ey = ds.y - ds.z[:, 0]
        assert abs(np.corrcoef(ex, ey)[0, 1]) < 0.03

    def test_response_variance(self):
        # var(X) = sigma_w^2 + sigma_z^2 + sigma_e^2; normal-sample variance
        # has standard error var * sqrt(2/(n-1))
        for sigma_w in [0.0, 0.25]:
            ds = gen_gaussian_latent(100_000, d=1, sigma_w=sigma_w, seed=SeedSpec(53))
            want = sigma_w**2 + 0.2**2 + 0.3**2
            se = want * math.sqrt(2.0 / (100_000 - 1))
            assert abs(ds.x.var(ddof=1) - want) < 3.0 * se

    def test_negative_sigma_rejected(self):
        with pytest.raises(ValueError):
            gen_gaussian_latent(10, d=1, sigma_w=-0.1, seed=SeedSpec(0))


class TestModuloCounterexample:
    def test_pairwise_correlations_vanish(self):
        ds = gen_modulo_counterexample(100_000, seed=SeedSpec(54))
        z = ds.z[:, 0]
        assert abs(np.corrcoef(ds.x, z)[0, 1]) < 0.01
        assert abs(np.corrcoef(ds.y, z)[0, 1]) < 0.01
        assert abs(np.corrcoef(ds.x, ds.y)[0, 1]) < 0.01

    def test_conditional_mean_spot_check(self):
        # E[X | Y=y, Z=z] = z - y + 0.5 when y <= z; at (0.2, 0.7) this is 1.0
        ds = gen_modulo_counterexample(1_000_000, seed=SeedSpec(55))
        sel = (np.abs(ds.y - 0.2) < 0.02) & (np.abs(ds.z[:, 0] - 0.7) < 0.02)
        assert sel.sum() > 800
        assert ds.x[sel].mean() == pytest.approx(1.0, abs=0.05)

    def test_z_in_unit_interval(self):
        ds = gen_modulo_counterexample(5000, seed=SeedSpec(56))
        assert ds.z.min() >= 0.0 and ds.z.max() < 1.0

    def test_determinism(self):
        a = gen_modulo_counterexample(64, seed=SeedSpec(57))
        b = gen_modulo_counterexample(64, seed=SeedSpec(57))
        assert np.array_equal(a.x, b.x)


class TestPairwiseGaussian:
    def test_zero_correlation(self):
        ds = gen_pairwise_gaussian(10_000, rho=0.0, seed=SeedSpec(58))
        assert abs(np.corrcoef(ds.x, ds.z[:, 0])[0, 1]) < 0.03

    def test_strong_correlation(self):
        ds = gen_pairwise_gaussian(10_000, rho=0.9, seed=SeedSpec(59))
        assert np.corrcoef(ds.x, ds.z[:, 0])[0, 1] == pytest.approx(0.9, abs=0.02)

    def test_invalid_rho(self):
        for rho in [-1.0, 1.0, 1.5]:
            with pytest.raises(ValueError):
                gen_pairwise_gaussian(10, rho=rho, seed=SeedSpec(0))

    def test_determinism(self):
        a = gen_pairwise_gaussian(32, rho=0.4, seed=SeedSpec(60))
        b = gen_pairwise_gaussian(32, rho=0.4, seed=SeedSpec(60))
        assert np.array_equal(a.x, b.x)


class TestGaussianOracles:
    def test_latent_conditional_law_closed_form(self):
        # X | Z=z is N(z_1, sigma_w^2 + sigma_e^2) by construction
        sigma_w, sigma_e, sigma_z = 0.2, 0.3, 0.2
        fx, fy, chain = gaussian_latent_oracles(sigma_w, sigma_e, sigma_z, d=2)
        sd = math.sqrt(sigma_w**2 + sigma_e**2)
        rng = make_stream(SeedSpec(61))
        for _ in range(100):
            z = rng.standard_normal(2) * sigma_z
            x = float(rng.standard_normal())
            want = float(std_normal_cdf((x - z[0]) / sd))
            assert fx.cdf(x, z) == pytest.approx(want, abs=1e-13)
            assert fy.cdf(x, z) == pytest.approx(want, abs=1e-13)

    def test_oracle_chain_is_scaled_marginal(self):
        chain = GaussianOracleChain(sigma_z=0.2, d=3)
        rng = make_stream(SeedSpec(62))
        zs = rng.standard_normal((50, 3)) * 0.2
        got = chain.apply(zs)
        want = std_normal_cdf(zs / 0.2)
        assert np.max(np.abs(got - want)) < 1e-14

    def test_quantile_inverts_cdf(self):
        fx, _, _ = gaussian_latent_oracles(0.1, 0.3, 0.2)
        z = np.array([0.15])
        for u in [0.01, 0.3, 0.5, 0.99]:
            x = fx.quantile(u, z)
            assert fx.cdf(x, z) == pytest.approx(u, abs=1e-12)

    def test_oracle_residuals_uniform(self):
        ds = gen_gaussian_latent(10_000, d=1, sigma_w=0.0, seed=SeedSpec(63))
        fx, _, _ = gaussian_latent_oracles(sigma_w=0.0)
        u = fx.cdf_many(ds.x, ds.z)
        assert ks_uniform_distance(u) <= 0.02

    def test_non_positive_definite_rejected(self):
        with pytest.raises(ValueError):
            gaussian_oracle_residual(0.0, [0.0], [[1.0, 2.0], [2.0, 1.0]])


class TestScenarioRegistry:
    def test_known_scenarios(self):
        assert set(SCENARIOS) == {"gaussian-latent", "modulo-counterexample"}

    def test_make_and_generate(self):
        sc = make_scenario("gaussian-latent", d=2, sigma_w=0.1)
        ds1 = generate(sc, 50, SeedSpec(64))
        ds2 = generate(sc, 50, SeedSpec(64))
        assert ds1.d == 2
        assert np.array_equal(ds1.x, ds2.x)

    def test_unknown_scenario(self):
        with pytest.raises(ValueError, match="unknown scenario"):
            make_scenario("cauchy-latent")

    def test_unknown_parameter(self):
        with pytest.raises(ValueError, match="does not take"):
            make_scenario("modulo-counterexample", sigma_w=0.1)

    def test_invalid_parameter_value(self):
        with pytest.raises(ValueError):
            make_scenario("gaussian-latent", sigma_w=-1.0)
        with pytest.raises(ValueError):
            make_scenario("gaussian-latent", d=0)

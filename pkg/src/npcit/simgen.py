"""Seeded scenario generators and exact Gaussian oracles.

Two scenarios drive the experiments:

* "gaussian-latent": Z ~ N(0, sigma_z^2 I_d), X = W + Z_1 + eps,
  Y = W + Z_1 + eps', with a shared latent W ~ N(0, sigma_w^2). X and Y
  are conditionally independent given Z exactly when sigma_w = 0.
* "modulo-counterexample": W1, W2, W3 iid U(0,1), X = W1 + W3, Y = W2,
  Z = (W1 + W2) mod 1. All three pairs are independent, yet X and Y are
  conditionally dependent given Z, so tests that only look at the pair of
  residuals stay blind here.

The Gaussian oracles expose the same cdf/quantile interface as fitted
kernel models but evaluate the exact conditional law, which pins down
ground truth in tests.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .core import Dataset, SeedSpec, make_stream, std_normal_cdf, std_normal_quantile

__all__ = [
    "Scenario",
    "SCENARIOS",
    "make_scenario",
    "generate",
    "gen_gaussian_latent",
    "gen_modulo_counterexample",
    "gen_pairwise_gaussian",
    "gaussian_oracle_residual",
    "gaussian_latent_oracles",
    "GaussianOracleModel",
    "GaussianOracleChain",
]


@dataclass(frozen=True)
class Scenario:
    """Named generator with validated parameters."""

    name: str
    parameters: dict = field(default_factory=dict)
    oracle_available: bool = False

    def __post_init__(self):
        for key, value in self.parameters.items():
            if key.startswith("sigma") and value < 0.0:
                raise ValueError(f"{key} must be nonnegative, got {value}")
        d = self.parameters.get("d")
        if d is not None and int(d) < 1:
            raise ValueError(f"d must be >= 1, got {d}")


def gen_gaussian_latent(
    n: int,
    d: int = 1,
    sigma_w: float = 0.0,
    sigma_e: float = 0.3,
    sigma_z: float = 0.2,
    seed: SeedSpec = SeedSpec(0),
) -> Dataset:
    """Latent-confounder Gaussian scenario; conditionally independent iff
    sigma_w = 0. Defaults fix sigma_e = 0.3 and sigma_z = 0.2."""
    if n < 1:
        raise ValueError("n must be >= 1")
    if min(sigma_w, sigma_e, sigma_z) < 0.0:
        raise ValueError("sigma parameters must be nonnegative")
    if d < 1:
        raise ValueError("d must be >= 1")
    rng = make_stream(seed)
    z = sigma_z * rng.standard_normal((n, d))
    w = sigma_w * rng.standard_normal(n)
    eps = sigma_e * rng.standard_normal(n)
    eps2 = sigma_e * rng.standard_normal(n)
    x = w + z[:, 0] + eps
    y = w + z[:, 0] + eps2
    return Dataset(x=x, z=z, y=y)


def gen_modulo_counterexample(n: int, seed: SeedSpec = SeedSpec(0)) -> Dataset:
    """Pairwise-independent triple with conditional dependence, d = 1."""
    if n < 1:
        raise ValueError("n must be >= 1")
    rng = make_stream(seed)
    w1 = rng.random(n)
    w2 = rng.random(n)
    w3 = rng.random(n)
    x = w1 + w3
    y = w2
    z = np.mod(w1 + w2, 1.0)
    return Dataset(x=x, z=z[:, None], y=y)


def gen_pairwise_gaussian(
    n: int, rho: float, seed: SeedSpec = SeedSpec(0), d: int = 1
) -> Dataset:
    """(X, Z) Gaussian with corr(X, Z_1) = rho and unit variances; extra Z
    coordinates (d > 1) are independent N(0, 1). Transform-test fixture."""
    if not -1.0 < rho < 1.0:
        raise ValueError(f"rho must lie in (-1, 1), got {rho}")
    if n < 1 or d < 1:
        raise ValueError("n and d must be >= 1")
    rng = make_stream(seed)
    z = rng.standard_normal((n, d))
    x = rho * z[:, 0] + np.sqrt(1.0 - rho * rho) * rng.standard_normal(n)
    return Dataset(x=x, z=z)


@dataclass(frozen=True)
class GaussianOracleModel:
    """Exact conditional law of X given Z for a joint Gaussian vector:
    X | Z = z ~ N(mu1 + s12' S22^-1 (z - mu2), s11 - s12' S22^-1 s12).

    Satisfies the fitted-model interface (cdf, quantile, weights are not
    needed by any caller that accepts oracles)."""

    mu1: float
    mu2: np.ndarray
    sigma: np.ndarray

    def __post_init__(self):
        mu2 = np.atleast_1d(np.asarray(self.mu2, dtype=float))
        sigma = np.asarray(self.sigma, dtype=float)
        d = mu2.shape[0]
        if sigma.shape != (d + 1, d + 1):
            raise ValueError(f"sigma must be ({d + 1}, {d + 1}), got {sigma.shape}")
        if not np.allclose(sigma, sigma.T, atol=1e-12):
            raise ValueError("sigma must be symmetric")
        try:
            np.linalg.cholesky(sigma)
        except np.linalg.LinAlgError:
            raise ValueError("sigma must be positive definite") from None
        s22_inv = np.linalg.inv(sigma[1:, 1:])
        s12 = sigma[0, 1:]
        slope = s22_inv @ s12
        cond_var = float(sigma[0, 0] - s12 @ slope)
        if cond_var <= 0.0:
            raise ValueError("conditional variance must be positive")
        object.__setattr__(self, "mu2", mu2)
        object.__setattr__(self, "sigma", sigma)
        object.__setattr__(self, "_slope", slope)
        object.__setattr__(self, "_cond_sd", float(np.sqrt(cond_var)))

    @property
    def d(self) -> int:
        return self.mu2.shape[0]

    def _cond_mean(self, zs: np.ndarray) -> np.ndarray:
        return self.mu1 + (zs - self.mu2) @ self._slope

    def _points(self, zs) -> np.ndarray:
        zs = np.asarray(zs, dtype=float)
        if zs.ndim == 1:
            zs = zs[:, None] if self.d == 1 else zs[None, :]
        if zs.ndim != 2 or zs.shape[1] != self.d:
            raise ValueError(f"conditioning points must be (m, {self.d}), got {zs.shape}")
        return zs

    def cdf_many(self, xs, zs) -> np.ndarray:
        zs = self._points(zs)
        xs = np.asarray(xs, dtype=float)
        return std_normal_cdf((xs - self._cond_mean(zs)) / self._cond_sd)

    def cdf(self, x, z) -> float:
        return float(self.cdf_many(np.atleast_1d(float(x)), z)[0])

    def quantile_many(self, us, zs) -> np.ndarray:
        zs = self._points(zs)
        return self._cond_mean(zs) + self._cond_sd * std_normal_quantile(us)

    def quantile(self, u, z) -> float:
        return float(self.quantile_many(np.atleast_1d(float(u)), z)[0])


def gaussian_oracle_residual(mu1, mu2, sigma) -> GaussianOracleModel:
    """Oracle conditional CDF for a joint Gaussian (X, Z); sigma is the full
    (1+d) x (1+d) covariance with X first."""
    return GaussianOracleModel(mu1=float(mu1), mu2=mu2, sigma=sigma)


@dataclass(frozen=True)
class GaussianOracleChain:
    """Exact chain for Z ~ N(0, sigma_z^2 I_d): independent coordinates, so
    every stage is the marginal normal CDF."""

    sigma_z: float
    d: int

    def __post_init__(self):
        if self.sigma_z <= 0.0 or self.d < 1:
            raise ValueError("sigma_z must be positive and d >= 1")

    def apply(self, zs) -> np.ndarray:
        zs = np.asarray(zs, dtype=float)
        if zs.ndim == 1:
            zs = zs[:, None]
        if zs.shape[1] != self.d:
            raise ValueError(f"points have {zs.shape[1]} coordinates, chain has {self.d}")
        return std_normal_cdf(zs / self.sigma_z)


def gaussian_latent_oracles(
    sigma_w: float = 0.0,
    sigma_e: float = 0.3,
    sigma_z: float = 0.2,
    d: int = 1,
):
    """True conditional models for the gaussian-latent scenario.

    X | Z = z ~ N(z_1, sigma_w^2 + sigma_e^2) whatever sigma_w is (the
    latent shift and the noise are jointly Gaussian), and likewise for Y;
    the chain is the product of N(0, sigma_z^2) marginals. Returns
    (fx, fy, chain)."""
    var_x = sigma_w**2 + sigma_z**2 + sigma_e**2
    sigma = np.zeros((d + 1, d + 1))
    sigma[0, 0] = var_x
    sigma[0, 1] = sigma[1, 0] = sigma_z**2
    sigma[1:, 1:] = sigma_z**2 * np.eye(d)
    fx = gaussian_oracle_residual(0.0, np.zeros(d), sigma)
    fy = gaussian_oracle_residual(0.0, np.zeros(d), sigma)
    chain = GaussianOracleChain(sigma_z=sigma_z, d=d)
    return fx, fy, chain


def _gaussian_latent_from_params(n: int, seed: SeedSpec, params: dict) -> Dataset:
    return gen_gaussian_latent(
        n,
        d=int(params.get("d", 1)),
        sigma_w=float(params.get("sigma_w", 0.0)),
        sigma_e=float(params.get("sigma_e", 0.3)),
        sigma_z=float(params.get("sigma_z", 0.2)),
        seed=seed,
    )


def _modulo_from_params(n: int, seed: SeedSpec, params: dict) -> Dataset:
    return gen_modulo_counterexample(n, seed=seed)


SCENARIOS = {
    "gaussian-latent": _gaussian_latent_from_params,
    "modulo-counterexample": _modulo_from_params,
}

_SCENARIO_KEYS = {
    "gaussian-latent": {"d", "sigma_w", "sigma_e", "sigma_z"},
    "modulo-counterexample": set(),
}

_ORACLE_AVAILABLE = {"gaussian-latent": True, "modulo-counterexample": False}


def make_scenario(name: str, **parameters) -> Scenario:
    if name not in SCENARIOS:
        raise ValueError(f"unknown scenario {name!r}; known: {sorted(SCENARIOS)}")
    unknown = set(parameters) - _SCENARIO_KEYS[name]
    if unknown:
        raise ValueError(f"scenario {name!r} does not take parameters {sorted(unknown)}")
    return Scenario(
        name=name,
        parameters=dict(parameters),
        oracle_available=_ORACLE_AVAILABLE[name],
    )


def generate(scenario: Scenario, n: int, seed: SeedSpec) -> Dataset:
    """Draw a dataset from a registered scenario; pure in (scenario, n, seed)."""
    return SCENARIOS[scenario.name](n, seed, scenario.parameters)

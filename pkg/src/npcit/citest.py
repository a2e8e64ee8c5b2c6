"""The full conditional-independence test.

Pipeline: fit the two conditional CDFs and the conditioning chain, map the
sample to its residual vector, evaluate the energy statistic against
N(0, I_{d+2}), then calibrate by the model-based bootstrap:

  Step 1  draw (U*_1, U*_2, Z*) from U(0,1) x U(0,1) x empirical-Z;
  Step 2  invert the ORIGINAL fitted models at the uniforms, conditioning
          each row on its own resampled Z*_i;
  Step 3  refit the models on the bootstrap sample (bandwidths refit by
          default, or frozen per config);
  Step 4  evaluate the energy statistic on the refitted transform.

The p-value is the add-one exceedance rate. A permutation test is
deliberately not offered: permuting rows is invalid once the transform is
estimated rather than known.
"""

from __future__ import annotations

from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

from .core import Dataset, SeedSpec, make_stream
from .dcov import partial_dcov
from .energy import energy_statistic
from .kernel_cde import ConditionalCdfModel, fit
from .simgen import Scenario, generate
from .transform import (
    RosenblattChain,
    build_residual_vector,
    fit_rosenblatt,
    ks_uniform_distance,
)

__all__ = [
    "CiTestConfig",
    "CiTestResult",
    "run_test",
    "bootstrap_replicate",
    "pvalue_histogram",
]

_MIN_N = 30  # practical floor for the smoothing steps
_UNIFORM_GUARD = 1e-12  # keeps Step-1 uniforms strictly inside (0, 1)


@dataclass(frozen=True)
class CiTestConfig:
    """Free parameters of the bootstrap test."""

    bootstrap_replicates: int = 199
    bandwidth_method: str = "least-squares-cv"
    refit_bandwidths: bool = True
    seed: SeedSpec = SeedSpec(0)
    clip_epsilon: float | None = None  # None: 1/(n+1), resolved per sample

    def __post_init__(self):
        if int(self.bootstrap_replicates) < 99:
            raise ValueError(
                f"need at least 99 bootstrap replicates, got {self.bootstrap_replicates}"
            )
        object.__setattr__(self, "bootstrap_replicates", int(self.bootstrap_replicates))
        if self.bandwidth_method not in ("rule-of-thumb", "least-squares-cv"):
            raise ValueError(f"unknown bandwidth method {self.bandwidth_method!r}")
        if self.clip_epsilon is not None and not 0.0 < self.clip_epsilon < 0.5:
            raise ValueError("clip_epsilon must lie in (0, 0.5)")


@dataclass(frozen=True)
class CiTestResult:
    statistic: float
    p_value: float
    bootstrap_statistics: tuple[float, ...]
    config: CiTestConfig
    bandwidths: dict = field(default_factory=dict)
    diagnostics: dict = field(default_factory=dict)
    n: int = 0
    d: int = 0

    def __post_init__(self):
        if not 0.0 < self.p_value <= 1.0:
            raise ValueError("p_value must lie in (0, 1]")
        if not all(np.isfinite(self.bootstrap_statistics)):
            raise ValueError("bootstrap statistics must be finite")


def _sorted_rows(z: np.ndarray) -> np.ndarray:
    """Rows in lexicographic order; keys the resampling stream to the row
    multiset so shuffled inputs bootstrap identically."""
    return z[np.lexsort(z.T[::-1])]


def _fit_models(dataset: Dataset, config: CiTestConfig):
    fx = fit(dataset.x, dataset.z, method=config.bandwidth_method)
    fy = fit(dataset.y, dataset.z, method=config.bandwidth_method)
    fz = fit_rosenblatt(dataset.z, method=config.bandwidth_method)
    return fx, fy, fz


def _replicate_from_sorted(
    fx: ConditionalCdfModel,
    fy: ConditionalCdfModel,
    fz: RosenblattChain,
    z_sorted: np.ndarray,
    replicate_id: int,
    config: CiTestConfig,
) -> float:
    n = z_sorted.shape[0]
    rng = make_stream(config.seed.child("bootstrap", int(replicate_id)))
    u1 = np.clip(rng.random(n), _UNIFORM_GUARD, 1.0 - _UNIFORM_GUARD)
    u2 = np.clip(rng.random(n), _UNIFORM_GUARD, 1.0 - _UNIFORM_GUARD)
    idx = rng.integers(0, n, size=n)
    z_star = z_sorted[idx]

    try:
        x_star = fx.quantile_many(u1, z_star)
        y_star = fy.quantile_many(u2, z_star)
        if config.refit_bandwidths:
            fx_star = fit(x_star, z_star, method=config.bandwidth_method)
            fy_star = fit(y_star, z_star, method=config.bandwidth_method)
            fz_star = fit_rosenblatt(z_star, method=config.bandwidth_method)
        else:
            fx_star = fit(x_star, z_star, bandwidths=fx.bandwidths)
            fy_star = fit(y_star, z_star, bandwidths=fy.bandwidths)
            fz_star = fit_rosenblatt(
                z_star, bandwidths=[s.bandwidths for s in fz.stages]
            )
        boot = Dataset(x=x_star, z=z_star, y=y_star)
        rv = build_residual_vector(
            boot, fx_star, fy_star, fz_star, clip_epsilon=config.clip_epsilon
        )
        return float(energy_statistic(rv.t).statistic)
    except Exception as exc:
        raise RuntimeError(f"bootstrap replicate {replicate_id} failed: {exc}") from exc


def bootstrap_replicate(
    fx: ConditionalCdfModel,
    fy: ConditionalCdfModel,
    fz: RosenblattChain,
    z,
    replicate_id: int,
    config: CiTestConfig,
) -> float:
    """One Step 1-4 replicate; deterministic in (config.seed, replicate_id)."""
    z = np.asarray(z, dtype=float)
    if z.ndim == 1:
        z = z[:, None]
    return _replicate_from_sorted(fx, fy, fz, _sorted_rows(z), replicate_id, config)


def _replicate_task(args) -> list[float]:
    fx, fy, fz, z_sorted, ids, config = args
    return [
        _replicate_from_sorted(fx, fy, fz, z_sorted, rid, config) for rid in ids
    ]


def _chunk_ids(count: int, workers: int) -> list[list[int]]:
    if workers <= 1:
        return [list(range(count))]
    per = max(1, -(-count // (workers * 4)))
    return [list(range(s, min(s + per, count))) for s in range(0, count, per)]


def run_test(dataset: Dataset, config: CiTestConfig, workers: int = 1) -> CiTestResult:
    """Full test on a dataset with both responses; see the module pipeline."""
    if dataset.y is None:
        raise ValueError("dataset needs both responses x and y")
    if dataset.n < _MIN_N:
        raise ValueError(f"need n >= {_MIN_N} for stable smoothing, got {dataset.n}")
    fx, fy, fz = _fit_models(dataset, config)
    rv = build_residual_vector(dataset, fx, fy, fz, clip_epsilon=config.clip_epsilon)
    observed = float(energy_statistic(rv.t).statistic)

    z_sorted = _sorted_rows(dataset.z)
    b = config.bootstrap_replicates
    id_lists = _chunk_ids(b, workers)
    tasks = [(fx, fy, fz, z_sorted, ids, config) for ids in id_lists]
    if workers <= 1:
        nested = [_replicate_task(t) for t in tasks]
    else:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            nested = list(pool.map(_replicate_task, tasks))
    boot = [v for chunk in nested for v in chunk]

    exceed = sum(1 for v in boot if v >= observed)
    p_value = (1.0 + exceed) / (b + 1.0)
    diagnostics = {
        "ks_uniform": tuple(
            ks_uniform_distance(rv.u[:, j]) for j in range(rv.u.shape[1])
        )
    }
    bandwidths = {
        "x": fx.bandwidths,
        "y": fy.bandwidths,
        "z": tuple(stage.bandwidths for stage in fz.stages),
    }
    return CiTestResult(
        statistic=observed,
        p_value=p_value,
        bootstrap_statistics=tuple(boot),
        config=config,
        bandwidths=bandwidths,
        diagnostics=diagnostics,
        n=dataset.n,
        d=dataset.d,
    )


def _histogram_task(args) -> list[float]:
    scenario, n, ids, config, method = args
    out = []
    for i in ids:
        data = generate(scenario, n, config.seed.child("scenario", i))
        run_seed = config.seed.child("replication", i)
        if method == "full-test":
            cfg = replace(config, seed=run_seed)
            out.append(run_test(data, cfg).p_value)
        else:
            fx = fit(data.x, data.z, method=config.bandwidth_method)
            fy = fit(data.y, data.z, method=config.bandwidth_method)
            res = partial_dcov(
                data,
                fx,
                fy,
                permutations=config.bootstrap_replicates,
                seed=run_seed,
            )
            out.append(res.p_value)
    return out


def pvalue_histogram(
    scenario: Scenario,
    n: int,
    replications: int,
    config: CiTestConfig,
    method: str = "full-test",
    workers: int = 1,
) -> np.ndarray:
    """p-values over fresh scenario draws, one full test per replication.

    method "partial-dcov" swaps in the residual distance-covariance
    permutation test (with `bootstrap_replicates` permutations) for the
    blind-comparison histograms.
    """
    if method not in ("full-test", "partial-dcov"):
        raise ValueError(f"unknown method {method!r}")
    if replications < 1:
        raise ValueError("replications must be >= 1")
    id_lists = _chunk_ids(replications, workers)
    tasks = [(scenario, n, ids, config, method) for ids in id_lists]
    if workers <= 1:
        nested = [_histogram_task(t) for t in tasks]
    else:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            nested = list(pool.map(_histogram_task, tasks))
    return np.asarray([p for chunk in nested for p in chunk])

"""Residual and vector transforms built from conditional CDFs.

The scalar residual of an observation is its estimated conditional
probability F_{X|Z}(x | z). Stacking the two response residuals with the
chained coordinatewise conditional CDFs of Z gives a vector that is
uniform on the unit cube exactly when X and Y are conditionally
independent given Z; mapping through the normal quantile turns that into
a standard multivariate normal null.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import Dataset, std_normal_quantile
from .kernel_cde import Bandwidths, fit

__all__ = [
    "RosenblattChain",
    "ResidualVector",
    "residual",
    "fit_rosenblatt",
    "build_residual_vector",
    "ks_uniform_distance",
]


def residual(model, x, z) -> float:
    """Estimated nonparametric residual F_{X|Z}(x | z) in [0, 1].

    Works with any object exposing the conditional-CDF interface, fitted
    kernel models and exact oracles alike.
    """
    return model.cdf(x, z)


@dataclass(frozen=True)
class RosenblattChain:
    """Coordinatewise conditional CDFs of Z in ascending coordinate order.

    Stage j models Z_j given (Z_1 .. Z_{j-1}); stage 1 is a smoothed
    marginal CDF with an empty conditioning set. The ascending storage
    order is part of the contract and is what `apply` evaluates.
    """

    stages: tuple

    def __post_init__(self):
        stages = tuple(self.stages)
        if not stages:
            raise ValueError("chain needs at least one stage")
        for j, stage in enumerate(stages):
            if stage.d != j:
                raise ValueError(
                    f"stage {j + 1} conditions on {stage.d} coordinates, expected {j}"
                )
        object.__setattr__(self, "stages", stages)

    @property
    def d(self) -> int:
        return len(self.stages)

    def apply(self, zs) -> np.ndarray:
        """Map points through the chain; column j holds stage j's CDF value."""
        zs = np.asarray(zs, dtype=float)
        if zs.ndim == 1:
            zs = zs[:, None]
        if zs.shape[1] != self.d:
            raise ValueError(f"points have {zs.shape[1]} coordinates, chain has {self.d}")
        out = np.empty_like(zs)
        for j, stage in enumerate(self.stages):
            out[:, j] = stage.cdf_many(zs[:, j], zs[:, :j])
        return out


def fit_rosenblatt(
    z,
    method: str = "rule-of-thumb",
    bandwidths: list[Bandwidths] | None = None,
) -> RosenblattChain:
    """Fit the d-stage chain on an (n, d) conditioning sample.

    `bandwidths`, when given, must hold one Bandwidths per stage; otherwise
    each stage selects its own via the named method.
    """
    z = np.asarray(z, dtype=float)
    if z.ndim == 1:
        z = z[:, None]
    d = z.shape[1]
    if bandwidths is not None and len(bandwidths) != d:
        raise ValueError(f"need {d} per-stage bandwidths, got {len(bandwidths)}")
    stages = []
    for j in range(d):
        bw = bandwidths[j] if bandwidths is not None else None
        stages.append(fit(z[:, j], z[:, :j], bandwidths=bw, method=method))
    return RosenblattChain(tuple(stages))


@dataclass(frozen=True)
class ResidualVector:
    """The transformed sample: u rows are the stacked conditional
    probabilities (clipped inside (0,1)), t rows their normal scores."""

    u: np.ndarray
    t: np.ndarray
    clip_epsilon: float

    def __post_init__(self):
        u = np.asarray(self.u, dtype=float)
        t = np.asarray(self.t, dtype=float)
        eps = float(self.clip_epsilon)
        if u.shape != t.shape or u.ndim != 2:
            raise ValueError("u and t must be matrices of identical shape")
        if not 0.0 < eps < 0.5:
            raise ValueError(f"clip epsilon must be in (0, 0.5), got {eps}")
        if np.any(u < eps) or np.any(u > 1.0 - eps):
            raise ValueError("u entries must lie in [eps, 1 - eps]")
        u.setflags(write=False)
        t.setflags(write=False)
        object.__setattr__(self, "u", u)
        object.__setattr__(self, "t", t)
        object.__setattr__(self, "clip_epsilon", eps)

    @property
    def n(self) -> int:
        return self.u.shape[0]


def build_residual_vector(
    dataset: Dataset,
    fx,
    fy,
    fz: RosenblattChain,
    clip_epsilon: float | None = None,
) -> ResidualVector:
    """Stack (F_{X|Z}(X_i|Z_i), F_{Y|Z}(Y_i|Z_i), chain(Z_i)) per row, clip
    into [eps, 1-eps] with eps = 1/(n+1) by default, and apply the normal
    quantile columnwise."""
    if dataset.y is None:
        raise ValueError("dataset needs both responses x and y")
    d = dataset.d
    if fz.d != d:
        raise ValueError(f"chain covers {fz.d} coordinates, dataset has {d}")
    for name, model in (("x", fx), ("y", fy)):
        md = getattr(model, "d", d)
        if md != d:
            raise ValueError(f"model for {name} conditions on {md} coordinates, expected {d}")
    n = dataset.n
    eps = 1.0 / (n + 1) if clip_epsilon is None else float(clip_epsilon)
    u = np.empty((n, d + 2))
    u[:, 0] = fx.cdf_many(dataset.x, dataset.z)
    u[:, 1] = fy.cdf_many(dataset.y, dataset.z)
    u[:, 2:] = fz.apply(dataset.z)
    np.clip(u, eps, 1.0 - eps, out=u)
    t = std_normal_quantile(u)
    return ResidualVector(u=u, t=t, clip_epsilon=eps)


def ks_uniform_distance(values) -> float:
    """Kolmogorov-Smirnov distance between a sample in [0, 1] and U(0, 1)."""
    v = np.sort(np.asarray(values, dtype=float))
    n = v.shape[0]
    if n == 0:
        raise ValueError("empty sample")
    if np.any(v < 0.0) or np.any(v > 1.0):
        raise ValueError("values must lie in [0, 1]")
    hi = np.arange(1, n + 1) / n - v
    lo = v - np.arange(0, n) / n
    return float(max(hi.max(), lo.max()))

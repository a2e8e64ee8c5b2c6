"""Kernel estimation of conditional distribution functions.

The estimator is the weighted response-kernel CDF

    Fhat(x | z) = sum_i w_i(z) * K((x - X_i) / h1),
    w_i(z) = k((z - Z_i) / h2) / sum_j k((z - Z_j) / h2),

with Gaussian k and K, a product kernel with one bandwidth per conditioning
coordinate, and an empty conditioning set degenerating to a smoothed
marginal CDF (uniform weights). Weight normalization is done in log space
after subtracting the row maximum, so a conditioning point far outside the
data degrades smoothly to the CDF of its nearest training conditioner
instead of dividing by an underflowed zero.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np
from scipy.special import ndtr, ndtri

__all__ = [
    "Bandwidths",
    "ConditionalCdfModel",
    "ExtrapolationWarning",
    "fit",
    "select_bandwidths",
]

# exp() underflows to zero a little below this; a row whose best raw kernel
# value is under the threshold would have had a zero denominator
_LOG_UNDERFLOW = -745.0
_INV_SQRT_2PI = 1.0 / math.sqrt(2.0 * math.pi)
_QUANTILE_TOL = 1e-8
_ROT_CONSTANT = 1.06  # times the sample standard deviation; a plain choice


class ExtrapolationWarning(UserWarning):
    """Conditioning point so far from the training data that raw kernel
    weights underflow; the estimate falls back to the nearest conditioner."""


@dataclass(frozen=True)
class Bandwidths:
    """Smoothing bandwidths: one for the response, one per conditioning
    coordinate (possibly none, for a marginal model)."""

    h_response: float
    h_conditioning: tuple[float, ...] = ()

    def __post_init__(self):
        h1 = float(self.h_response)
        hc = tuple(float(h) for h in self.h_conditioning)
        if not (math.isfinite(h1) and h1 > 0.0):
            raise ValueError(f"h_response must be positive and finite, got {h1}")
        for j, h in enumerate(hc):
            if not (math.isfinite(h) and h > 0.0):
                raise ValueError(
                    f"h_conditioning[{j}] must be positive and finite, got {h}"
                )
        object.__setattr__(self, "h_response", h1)
        object.__setattr__(self, "h_conditioning", hc)


def _check_training(responses, conditioners):
    x = np.array(responses, dtype=float)
    z = np.array(conditioners, dtype=float)
    if z.ndim == 1:
        z = z[:, None]
    if x.ndim != 1 or z.ndim != 2:
        raise ValueError("responses must be a vector and conditioners a matrix")
    if x.shape[0] != z.shape[0]:
        raise ValueError(
            f"length mismatch: {x.shape[0]} responses, {z.shape[0]} conditioners"
        )
    if x.shape[0] < 2:
        raise ValueError(f"need at least 2 observations, got {x.shape[0]}")
    if not (np.all(np.isfinite(x)) and np.all(np.isfinite(z))):
        raise ValueError("training data contains non-finite values")
    for j in range(z.shape[1]):
        if z[:, j].std() == 0.0:
            raise ValueError(
                f"conditioning coordinate {j + 1} has zero variance; "
                "drop the degenerate column before fitting"
            )
    return x, z


@dataclass(frozen=True)
class ConditionalCdfModel:
    """Fitted kernel conditional CDF. Immutable; cdf/quantile are pure."""

    responses: np.ndarray
    conditioners: np.ndarray
    bandwidths: Bandwidths

    def __post_init__(self):
        x, z = _check_training(self.responses, self.conditioners)
        if len(self.bandwidths.h_conditioning) != z.shape[1]:
            raise ValueError(
                f"bandwidths cover {len(self.bandwidths.h_conditioning)} conditioning "
                f"coordinates but data has {z.shape[1]}"
            )
        x.setflags(write=False)
        z.setflags(write=False)
        object.__setattr__(self, "responses", x)
        object.__setattr__(self, "conditioners", z)

    @property
    def n(self) -> int:
        return self.responses.shape[0]

    @property
    def d(self) -> int:
        return self.conditioners.shape[1]

    def _log_kernel(self, zs: np.ndarray) -> np.ndarray:
        # unnormalized log product-kernel values, shape (m, n)
        if self.d == 0:
            return np.zeros((zs.shape[0], self.n))
        h = np.asarray(self.bandwidths.h_conditioning)
        diff = (zs[:, None, :] - self.conditioners[None, :, :]) / h
        return -0.5 * np.einsum("mnd,mnd->mn", diff, diff)

    def weights_many(self, zs) -> np.ndarray:
        """Normalized kernel weights for each conditioning point; rows are
        nonnegative and sum to one."""
        zs = self._check_points(zs)
        lw = self._log_kernel(zs)
        rowmax = lw.max(axis=1, keepdims=True)
        n_under = int((rowmax < _LOG_UNDERFLOW).sum())
        if n_under:
            warnings.warn(
                f"{n_under} conditioning point(s) lie far outside the training "
                "data; returning nearest-conditioner CDF values",
                ExtrapolationWarning,
                stacklevel=3,
            )
        w = np.exp(lw - rowmax)
        w /= w.sum(axis=1, keepdims=True)
        return w

    def weights(self, z) -> np.ndarray:
        return self.weights_many(self._one_point(z))[0]

    def _one_point(self, z) -> np.ndarray:
        """A single conditioning point as a (1, d) array."""
        if self.d == 0:
            return np.zeros((1, 0))
        arr = np.asarray(z, dtype=float).reshape(-1)
        if arr.shape[0] != self.d:
            raise ValueError(f"conditioning point must have {self.d} coordinates")
        return arr[None, :]

    def _check_points(self, zs) -> np.ndarray:
        zs = np.asarray(zs, dtype=float)
        if self.d == 0 and zs.ndim != 2:
            # only sensible reading of a dimensionless input: one point
            zs = np.zeros((1, 0)) if zs.size == 0 else None
            if zs is None:
                raise ValueError("marginal model takes (m, 0)-shaped conditioning input")
        elif zs.ndim == 1:
            zs = zs[:, None] if self.d == 1 else zs[None, :]
        if zs.ndim != 2 or zs.shape[1] != self.d:
            raise ValueError(f"conditioning points must be (m, {self.d}), got {zs.shape}")
        if not np.all(np.isfinite(zs)):
            raise ValueError("conditioning points contain non-finite values")
        return zs

    def cdf_many(self, xs, zs) -> np.ndarray:
        xs = np.asarray(xs, dtype=float)
        if not np.all(np.isfinite(xs)):
            raise ValueError("evaluation points contain non-finite values")
        w = self.weights_many(zs)
        return self._cdf_from_weights(w, xs)

    def _cdf_from_weights(self, w: np.ndarray, xs: np.ndarray) -> np.ndarray:
        arg = (xs[:, None] - self.responses[None, :]) / self.bandwidths.h_response
        vals = np.einsum("mn,mn->m", w, ndtr(arg))
        return np.clip(vals, 0.0, 1.0)

    def cdf(self, x, z) -> float:
        """Fhat(x | z)."""
        return float(self.cdf_many(np.atleast_1d(float(x)), self._one_point(z))[0])

    def quantile_many(self, us, zs) -> np.ndarray:
        us = np.asarray(us, dtype=float)
        if np.any(~np.isfinite(us)) or np.any(us <= 0.0) or np.any(us >= 1.0):
            raise ValueError("u must lie strictly inside (0, 1)")
        w = self.weights_many(zs)
        if w.shape[0] != us.shape[0]:
            raise ValueError(
                f"got {us.shape[0]} probabilities for {w.shape[0]} conditioning points"
            )
        return self._invert(w, us)

    def quantile(self, u, z) -> float:
        """x with |cdf(x | z) - u| <= 1e-8, by bracketed Newton/bisection on
        the strictly increasing mixture CDF."""
        return float(self.quantile_many(np.atleast_1d(float(u)), self._one_point(z))[0])

    def _invert(self, w: np.ndarray, us: np.ndarray) -> np.ndarray:
        x_train = self.responses
        h1 = self.bandwidths.h_response
        m = us.shape[0]
        order = np.argsort(x_train, kind="stable")
        x_sorted = x_train[order]

        # guaranteed bracket: every mixture component satisfies
        # Fhat(x_min + h1*t | z) <= Phi(t) and Fhat(x_max + h1*t | z) >= Phi(t),
        # so +-10 kernel widths cover u in (Phi(-10), Phi(10)) and the margin
        # widens automatically for more extreme targets
        t = ndtri(us)
        lo = x_sorted[0] + h1 * np.minimum(t, -10.0)
        hi = x_sorted[-1] + h1 * np.maximum(t, 10.0)

        # warm start at the weighted empirical quantile
        cw = np.cumsum(w[:, order], axis=1)
        pos = np.minimum((cw < us[:, None]).sum(axis=1), x_sorted.size - 1)
        x = np.clip(x_sorted[pos], lo, hi)

        remaining = np.ones(m, dtype=bool)
        for _ in range(200):
            idx = np.nonzero(remaining)[0]
            if idx.size == 0:
                break
            xi = x[idx]
            arg = (xi[:, None] - x_train[None, :]) / h1
            err = np.einsum("mn,mn->m", w[idx], ndtr(arg)) - us[idx]
            done = np.abs(err) <= _QUANTILE_TOL
            lo_i = np.where(err < 0, xi, lo[idx])
            hi_i = np.where(err > 0, xi, hi[idx])
            dens = np.einsum("mn,mn->m", w[idx], np.exp(-0.5 * arg * arg))
            dens *= _INV_SQRT_2PI / h1
            with np.errstate(divide="ignore", invalid="ignore"):
                x_new = xi - err / dens
            outside = ~np.isfinite(x_new) | (x_new <= lo_i) | (x_new >= hi_i)
            x_new = np.where(outside, 0.5 * (lo_i + hi_i), x_new)
            x[idx] = np.where(done, xi, x_new)
            lo[idx] = lo_i
            hi[idx] = hi_i
            remaining[idx] = ~done
        if remaining.any():
            raise RuntimeError(
                f"quantile inversion failed to reach {_QUANTILE_TOL} on "
                f"{int(remaining.sum())} point(s)"
            )
        return x


def select_bandwidths(responses, conditioners, method: str = "rule-of-thumb") -> Bandwidths:
    """Data-driven bandwidths.

    rule-of-thumb:
        h_response = 1.06 * std(X) * n^(-2/(d+4))
        h_conditioning[j] = 1.06 * std(Z_j) * n^(-1/(d+4))
    least-squares-cv:
        minimizes the leave-one-out CDF error
        sum_i sum_g (1{X_i <= x_g} - Fhat_{-i}(x_g | Z_i))^2 over a 50-point
        response grid, searching a 9-point log-spaced multiplier grid
        {0.25..4} around the rule-of-thumb, response axis first, then the
        conditioning axis (all conditioning coordinates share one multiplier).
    """
    x, z = _check_training(responses, conditioners)
    n, d = x.shape[0], z.shape[1]
    if method not in ("rule-of-thumb", "least-squares-cv"):
        raise ValueError(f"unknown bandwidth method {method!r}")

    sx = x.std(ddof=1)
    if sx == 0.0:
        raise ValueError("responses have zero variance; no usable bandwidth")
    h1 = _ROT_CONSTANT * sx * n ** (-2.0 / (d + 4))
    hc = tuple(
        _ROT_CONSTANT * z[:, j].std(ddof=1) * n ** (-1.0 / (d + 4)) for j in range(d)
    )
    rot = Bandwidths(h1, hc)
    if method == "rule-of-thumb":
        return rot
    if n < 10:
        warnings.warn(
            f"least-squares-cv needs n >= 10, got n={n}; using rule-of-thumb",
            UserWarning,
            stacklevel=2,
        )
        return rot

    multipliers = np.geomspace(0.25, 4.0, 9)
    grid = np.linspace(x.min(), x.max(), 50)
    indicator = (x[:, None] <= grid[None, :]).astype(float)

    if d > 0:
        hc_arr = np.asarray(rot.h_conditioning)
        diff = (z[:, None, :] - z[None, :, :]) / hc_arr
        scaled_sq = np.einsum("ijd,ijd->ij", diff, diff)

    def loo_weights(mult_c: float) -> np.ndarray:
        if d == 0:
            w = np.full((n, n), 1.0 / (n - 1))
            np.fill_diagonal(w, 0.0)
            return w
        lw = -0.5 * scaled_sq / (mult_c * mult_c)
        np.fill_diagonal(lw, -np.inf)
        lw -= lw.max(axis=1, keepdims=True)
        w = np.exp(lw)
        w /= w.sum(axis=1, keepdims=True)
        return w

    def objective(w: np.ndarray, mult_r: float) -> float:
        k = ndtr((grid[None, :] - x[:, None]) / (mult_r * rot.h_response))
        fitted = w @ k
        return float(((indicator - fitted) ** 2).sum())

    w_unit = loo_weights(1.0)
    scores_r = [objective(w_unit, mr) for mr in multipliers]
    best_r = multipliers[int(np.argmin(scores_r))]
    if d == 0:
        return Bandwidths(best_r * rot.h_response)
    scores_c = [objective(loo_weights(mc), best_r) for mc in multipliers]
    best_c = multipliers[int(np.argmin(scores_c))]
    return Bandwidths(
        best_r * rot.h_response,
        tuple(best_c * h for h in rot.h_conditioning),
    )


def fit(
    responses,
    conditioners,
    bandwidths: Bandwidths | None = None,
    method: str = "rule-of-thumb",
) -> ConditionalCdfModel:
    """Fit the kernel conditional CDF; bandwidths are selected by
    `select_bandwidths(method)` when not supplied."""
    x, z = _check_training(responses, conditioners)
    if bandwidths is None:
        bandwidths = select_bandwidths(x, z, method=method)
    return ConditionalCdfModel(responses=x, conditioners=z, bandwidths=bandwidths)

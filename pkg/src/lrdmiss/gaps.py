"""Missing-data injection and imputation.

A :class:`GappySeries` carries its values together with an explicit boolean
``observed`` mask; missing positions hold NaN. The first and last points are
always observed.
"""

from __future__ import annotations

from dataclasses import dataclass
from decimal import ROUND_HALF_UP, Decimal

import numpy as np
from scipy.special import ndtr, ndtri

from .streams import SeedLike, as_generator


@dataclass
class GappySeries:
    values: np.ndarray
    observed: np.ndarray

    def __post_init__(self) -> None:
        self.values = np.asarray(self.values, dtype=float)
        self.observed = np.asarray(self.observed, dtype=bool)
        if self.values.ndim != 1 or self.values.shape != self.observed.shape:
            raise ValueError("values and observed must be 1-d arrays of equal length")
        if len(self.values) and not (self.observed[0] and self.observed[-1]):
            raise ValueError("first and last values must be observed")
        if not np.all(np.isfinite(self.values[self.observed])):
            raise ValueError("observed values must be finite")
        self.values = np.where(self.observed, self.values, np.nan)

    @classmethod
    def complete(cls, values) -> "GappySeries":
        values = np.asarray(values, dtype=float)
        return cls(values, np.ones(len(values), dtype=bool))

    @classmethod
    def from_nan(cls, values) -> "GappySeries":
        """Build from an array where NaN marks a missing value."""
        values = np.asarray(values, dtype=float)
        return cls(values, ~np.isnan(values))

    def __len__(self) -> int:
        return len(self.values)

    @property
    def n_missing(self) -> int:
        return int(np.count_nonzero(~self.observed))

    @property
    def observed_values(self) -> np.ndarray:
        return self.values[self.observed]


@dataclass(frozen=True)
class MissingSpec:
    proportion: float
    seed: int = 0

    def __post_init__(self) -> None:
        if not (0.0 <= self.proportion <= 0.7):
            raise ValueError(f"missing proportion must lie in [0, 0.7], got {self.proportion}")

    def count(self, n: int) -> int:
        """round(proportion * n) with halves rounded up."""
        exact = Decimal(repr(self.proportion)) * n
        return int(exact.quantize(Decimal(1), rounding=ROUND_HALF_UP))


@dataclass(frozen=True)
class TruncNormalParams:
    mu: float
    sigma: float
    a: float
    b: float

    def __post_init__(self) -> None:
        if not self.sigma > 0:
            raise ValueError("sigma must be positive")
        if not self.a < self.b:
            raise ValueError("need a < b")

    def pdf(self, x):
        from scipy.stats import truncnorm

        lo, hi = (self.a - self.mu) / self.sigma, (self.b - self.mu) / self.sigma
        return truncnorm.pdf(x, lo, hi, loc=self.mu, scale=self.sigma)


def missing_mask(n: int, spec: MissingSpec, rng: SeedLike = None) -> np.ndarray:
    """Observed-mask with ``spec.count(n)`` interior positions missing.

    The mask depends only on ``(n, spec.proportion)`` and the random source, never
    on the series values. ``rng`` defaults to the stream of ``spec.seed``.
    """
    if n < 3:
        raise ValueError("series must have at least 3 points")
    k = spec.count(n)
    if k > n - 2:
        raise ValueError(f"cannot remove {k} of the {n - 2} interior points")
    gen = as_generator(spec.seed if rng is None else rng)
    observed = np.ones(n, dtype=bool)
    if k:
        observed[1 + gen.choice(n - 2, size=k, replace=False)] = False
    return observed


def inject_missing(series, spec: MissingSpec, rng: SeedLike = None) -> GappySeries:
    values = np.asarray(series, dtype=float)
    return GappySeries(values, missing_mask(len(values), spec, rng))


def observed_stats(series: GappySeries) -> tuple[float, float, float, float]:
    """Mean, sample SD (n-1 divisor), min and max of the observed values."""
    obs = series.observed_values
    if len(obs) < 2:
        raise ValueError("need at least 2 observed values")
    return float(obs.mean()), float(obs.std(ddof=1)), float(obs.min()), float(obs.max())


def impute_mean(series: GappySeries) -> np.ndarray:
    obs = series.observed_values
    if len(obs) == 0:
        raise ValueError("need at least 1 observed value")
    return np.where(series.observed, series.values, obs.mean())


def impute_linear(series: GappySeries) -> np.ndarray:
    """Straight lines between the nearest observed neighbours of each gap."""
    t = np.arange(len(series))
    out = series.values.copy()
    miss = ~series.observed
    out[miss] = np.interp(t[miss], t[series.observed], series.observed_values)
    return out


def _trunc_normal_ppf(u, mu, sigma, a, b):
    """Inverse CDF of tN(mu, sigma^2, a, b); returns (x, degenerate)."""
    alpha = (a - mu) / sigma
    beta = (b - mu) / sigma
    if alpha > 0:
        # both bounds in the upper tail: work with survival probabilities
        sa, sb = ndtr(-alpha), ndtr(-beta)
        mass = sa - sb
        z = -ndtri(sa - u * mass)
    else:
        fa, fb = ndtr(alpha), ndtr(beta)
        mass = fb - fa
        z = ndtri(fa + u * mass)
    if not (mass > 0) or not np.isfinite(z):
        return min(max(mu, a), b), True
    x = mu + sigma * z
    # rounding can land exactly on a bound; keep the support open
    if x <= a:
        x = np.nextafter(a, b)
    elif x >= b:
        x = np.nextafter(b, a)
    return float(x), False


def sample_trunc_normal(params: TruncNormalParams, rng: SeedLike = None,
                        u: float | None = None) -> float:
    """One draw from tN(mu, sigma^2, a, b) by the inverse-CDF transform.

    Pass ``u`` to transform a given uniform instead of drawing one. When the
    truncation interval carries no normal mass at double precision, the draw
    degenerates to ``clip(mu, a, b)``; use :func:`trunc_normal_draw` to see that flag.
    """
    return trunc_normal_draw(params, rng, u)[0]


def trunc_normal_draw(params: TruncNormalParams, rng: SeedLike = None,
                      u: float | None = None) -> tuple[float, bool]:
    if u is None:
        u = as_generator(rng).random()
    return _trunc_normal_ppf(u, params.mu, params.sigma, params.a, params.b)


def impute_random_tn(series: GappySeries, varsigma: float = 10.0, seed: SeedLike = 0) -> np.ndarray:
    """Truncated-normal random substitution.

    Scanning left to right, each missing y_t is drawn from
    tN(y_{t-1}, (S / varsigma)^2, min_obs, max_obs), where y_{t-1} is the
    already final left neighbour (observed or imputed) and S the observed SD.
    One uniform is consumed per missing point, in time order.
    """
    if not varsigma > 0:
        raise ValueError("varsigma must be positive")
    out = series.values.copy()
    missing = np.flatnonzero(~series.observed)
    if len(missing) == 0:
        return out
    _, sd, lo, hi = observed_stats(series)
    sigma = sd / varsigma
    if not sigma > 0 or not lo < hi:
        # constant observed values: nothing to spread
        out[missing] = lo
        return out
    uniforms = as_generator(seed).random(len(missing))
    for t, u in zip(missing, uniforms):
        out[t] = _trunc_normal_ppf(u, out[t - 1], sigma, lo, hi)[0]
    return out


IMPUTERS = {
    "mean": lambda s, varsigma=10.0, seed=0: impute_mean(s),
    "linear": lambda s, varsigma=10.0, seed=0: impute_linear(s),
    "random": impute_random_tn,
}


def impute(series: GappySeries, method: str, varsigma: float = 10.0, seed: SeedLike = 0) -> np.ndarray:
    try:
        fn = IMPUTERS[method]
    except KeyError:
        raise ValueError(f"unknown imputation method {method!r}") from None
    return fn(series, varsigma=varsigma, seed=seed)

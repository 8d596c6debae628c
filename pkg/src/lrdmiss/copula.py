"""Copula-based estimator of d that works directly on gappy series.

For each lag h the copula parameter of the pair (X_t, X_{t+h}) is estimated by
inverting Spearman's rho over the complete pairs only. Near independence the
covariance is linear in the copula parameter, gamma(h) ~ K theta_h, where

    K = int int dC_theta(u, v)/dtheta |_{theta = 0} / (f(F^{-1}(u)) f(F^{-1}(v))) du dv

is estimated with a kernel density and the empirical quantile function of the
observed values. d is then the least-squares fit of K theta_h to
Gamma(1 - d)/Gamma(d) h^{2d - 1} over the lags s..m.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from typing import Callable

import numpy as np
from scipy import integrate, optimize, stats
from scipy.special import bernoulli, factorial, gammaln, roots_legendre, rgamma

from .gaps import GappySeries
from .results import D_LOWER, D_UPPER, GRID_STEP, EstimateResult, EstimationError, minimize_d

FRANK_BOUND = 50.0


def _debye(k: int, x: float) -> float:
    """D_k(x) = k / x^k * int_0^x t^k / (e^t - 1) dt."""
    if x == 0:
        return 1.0
    val, _ = integrate.quad(lambda t: t ** k / np.expm1(t) if t != 0 else float(k == 1),
                            0.0, x, epsabs=0.0, epsrel=1e-13, limit=200)
    return k / x ** k * val


# rho(theta) = 12 sum_n B_2n n theta^(2n-1) / ((2n)! (2n+1) (n+1)), |theta| < 2 pi
_N = np.arange(1, 16)
_FRANK_SERIES = 12 * bernoulli(30)[2::2] * _N / (factorial(2 * _N) * (2 * _N + 1) * (_N + 1))


def frank_rho(theta: float) -> float:
    """Spearman's rho of the Frank copula, 1 - 12/theta (D_1 - D_2).

    The Debye form cancels badly near 0, so |theta| < 1 uses the power series.
    """
    if abs(theta) < 1:
        return float(np.sum(_FRANK_SERIES * theta ** (2 * _N - 1)))
    return 1 - 12 / theta * (_debye(1, theta) - _debye(2, theta))


def frank_theta(rho: float) -> float:
    if rho == 0:
        return 0.0
    lo, hi = (0.0, FRANK_BOUND) if rho > 0 else (-FRANK_BOUND, 0.0)
    if abs(rho) >= abs(frank_rho(hi if rho > 0 else lo)):
        raise EstimationError(f"Spearman rho {rho} outside the Frank range for |theta| <= {FRANK_BOUND}")
    return optimize.brentq(lambda t: frank_rho(t) - rho, lo, hi, xtol=1e-12, rtol=1e-12)


def _frank_cdf(u, v, theta):
    if theta == 0:
        return u * v
    return -np.log1p(np.expm1(-theta * u) * np.expm1(-theta * v) / np.expm1(-theta)) / theta


def _gauss_cdf(u, v, r):
    x, y = stats.norm.ppf(u), stats.norm.ppf(v)
    return stats.multivariate_normal(mean=[0.0, 0.0], cov=[[1.0, r], [r, 1.0]]).cdf(np.c_[x, y])


@dataclass(frozen=True)
class CopulaFamily:
    """A one-parameter copula family with independence at theta = 0.

    ``dtheta_factor(u)`` is the one-dimensional factor g with
    dC/dtheta|_0 (u, v) = g(u) g(v); both families here factorise that way.
    """

    name: str
    param_domain: tuple[float, float]
    theta_to_rho: Callable[[float], float]
    rho_to_theta: Callable[[float], float]
    cdf: Callable
    dtheta_factor: Callable[[np.ndarray], np.ndarray]
    independence_point: float = 0.0

    def dtheta_at_independence(self, u, v):
        return self.dtheta_factor(np.asarray(u)) * self.dtheta_factor(np.asarray(v))


GAUSSIAN = CopulaFamily(
    name="gaussian",
    param_domain=(-1.0, 1.0),
    # Spearman's rho of the Gaussian copula: (6/pi) arcsin(r/2)
    theta_to_rho=lambda r: 6 / np.pi * np.arcsin(r / 2),
    rho_to_theta=lambda rho: 2 * np.sin(np.pi * rho / 6),
    cdf=_gauss_cdf,
    dtheta_factor=lambda u: stats.norm.pdf(stats.norm.ppf(u)),
)

FRANK = CopulaFamily(
    name="frank",
    param_domain=(-FRANK_BOUND, FRANK_BOUND),
    theta_to_rho=frank_rho,
    rho_to_theta=frank_theta,
    cdf=_frank_cdf,
    # C_theta = uv + (theta/2) uv(1-u)(1-v) + O(theta^2)
    dtheta_factor=lambda u: u * (1 - u) / np.sqrt(2.0),
)

FAMILIES = {"gaussian": GAUSSIAN, "frank": FRANK}


def get_family(family: str | CopulaFamily) -> CopulaFamily:
    if isinstance(family, CopulaFamily):
        return family
    try:
        return FAMILIES[family.lower()]
    except KeyError:
        raise ValueError(f"unknown copula family {family!r}") from None


def derivative_check(family: str | CopulaFamily, h: float = 1e-4) -> float:
    """Max |centred difference of C_theta at +-h minus the analytic derivative|
    over a 9x9 interior grid."""
    fam = get_family(family)
    g = np.linspace(0.1, 0.9, 9)
    U, V = (a.ravel() for a in np.meshgrid(g, g))
    fd = (fam.cdf(U, V, h) - fam.cdf(U, V, -h)) / (2 * h)
    return float(np.max(np.abs(fd - fam.dtheta_at_independence(U, V))))


@lru_cache(maxsize=None)
def _verified(name: str) -> bool:
    err = derivative_check(name)
    if err > 1e-6:
        raise RuntimeError(f"{name} copula derivative at independence fails the finite-difference check ({err:.2e})")
    return True


def theta_from_rho(family: str | CopulaFamily, rho: float) -> float:
    if not -1 < rho < 1:
        raise EstimationError(f"|rho| must be < 1, got {rho}")
    return float(get_family(family).rho_to_theta(rho))


def theta_to_rho(family: str | CopulaFamily, theta: float) -> float:
    return float(get_family(family).theta_to_rho(theta))


@dataclass(frozen=True)
class CopulaConfig:
    family: str = "gaussian"
    s: int = 1
    m: int = 24
    min_pairs: int = 10
    density_bandwidth: float | None = None  # None: Silverman's rule
    quantile: str = "empirical"  # or "kde"
    quad_order: int = 64

    def validate(self, n: int) -> None:
        get_family(self.family)
        if not 0 < self.s < self.m < n:
            raise ValueError(f"need 0 < s < m < n, got s={self.s}, m={self.m}, n={n}")
        if self.quantile not in ("empirical", "kde"):
            raise ValueError("quantile must be 'empirical' or 'kde'")


@dataclass
class ThetaSequence:
    lags: np.ndarray
    theta_hat: np.ndarray
    rho_hat: np.ndarray
    pairs_used: np.ndarray
    dropped: tuple[int, ...] = ()


def pseudo_observations(series: GappySeries) -> np.ndarray:
    """Average ranks / (n_obs + 1) over the observed values; NaN stays NaN."""
    obs = series.observed
    if np.count_nonzero(obs) < 2:
        raise EstimationError("need at least 2 observed values")
    out = np.full(len(series), np.nan)
    out[obs] = stats.rankdata(series.values[obs]) / (np.count_nonzero(obs) + 1)
    return out


def _spearman(a: np.ndarray, b: np.ndarray) -> float:
    ra = stats.rankdata(a)
    rb = stats.rankdata(b)
    ra -= ra.mean()
    rb -= rb.mean()
    den = np.sqrt((ra @ ra) * (rb @ rb))
    return float(ra @ rb / den) if den > 0 else np.nan


def spearman_by_lag(pseudo, s: int = 1, m: int = 24, min_pairs: int = 10):
    """Sample Spearman rho of (y_i, y_{i+h}) over pairs with both ends observed.

    Returns ``(lags, rho, pairs_used, dropped)``; a lag with fewer than
    ``min_pairs`` complete pairs (or a constant side) is dropped.
    """
    y = np.asarray(pseudo, dtype=float)
    ok = ~np.isnan(y)
    lags, rhos, pairs, dropped = [], [], [], []
    for h in range(s, m + 1):
        both = ok[:-h] & ok[h:]
        count = int(np.count_nonzero(both))
        rho = _spearman(y[:-h][both], y[h:][both]) if count >= min_pairs else np.nan
        if np.isnan(rho):
            dropped.append(h)
            continue
        lags.append(h)
        rhos.append(rho)
        pairs.append(count)
    if not lags:
        raise EstimationError("every lag has too few complete pairs")
    return np.array(lags), np.array(rhos), np.array(pairs), tuple(dropped)


def theta_sequence(series: GappySeries, config: CopulaConfig | None = None) -> ThetaSequence:
    config = config or CopulaConfig()
    fam = get_family(config.family)
    lags, rho, pairs, dropped = spearman_by_lag(pseudo_observations(series), config.s,
                                                config.m, config.min_pairs)
    rho = np.clip(rho, -1 + 1e-12, 1 - 1e-12)
    theta = np.array([theta_from_rho(fam, r) for r in rho])
    return ThetaSequence(lags, theta, rho, pairs, dropped)


class KdeMargins:
    """Gaussian-kernel density and a quantile function for one sample."""

    def __init__(self, sample, bandwidth: float | None = None, quantile: str = "empirical"):
        x = np.sort(np.asarray(sample, dtype=float))
        if len(x) < 2 or not x[-1] > x[0]:
            raise EstimationError("need at least 2 distinct observed values")
        self.sample = x
        sd = x.std(ddof=1)
        # Silverman: (3n/4)^{-1/5} * sd, as in scipy's gaussian_kde
        self.bandwidth = bandwidth or sd * (len(x) * 3 / 4) ** (-0.2)
        self.quantile_kind = quantile

    def support(self) -> tuple[float, float]:
        """An interval holding all but ~1e-23 of the smoothed distribution."""
        return self.sample[0] - 10 * self.bandwidth, self.sample[-1] + 10 * self.bandwidth

    def density(self, q: np.ndarray) -> np.ndarray:
        z = (np.asarray(q)[:, None] - self.sample[None, :]) / self.bandwidth
        return stats.norm.pdf(z).mean(axis=1) / self.bandwidth

    def cdf(self, q: np.ndarray) -> np.ndarray:
        z = (np.asarray(q)[:, None] - self.sample[None, :]) / self.bandwidth
        return stats.norm.cdf(z).mean(axis=1)

    def quantile(self, u: np.ndarray) -> np.ndarray:
        u = np.asarray(u, dtype=float)
        if self.quantile_kind == "empirical":
            n = len(self.sample)
            idx = np.clip(np.ceil(u * n).astype(int) - 1, 0, n - 1)
            return self.sample[idx]
        # invert the smoothed CDF: bracket on a grid, polish with Newton
        lo, hi = self.support()
        grid = np.linspace(lo, hi, 4097)
        q = np.interp(u, self.cdf(grid), grid)
        for _ in range(4):
            q = q - (self.cdf(q) - u) / self.density(q)
        return q


def khat(family: str | CopulaFamily, density: Callable, quantile: Callable,
         order: int = 64, cdf: Callable | None = None,
         support: tuple[float, float] | None = None) -> float:
    """Tensor-product Gauss-Legendre evaluation of the K integral on (0, 1)^2.

    The integrand factorises into g(u) g(v), so K = (int_0^1 g)^2. When
    ``quantile`` is the exact inverse of a smooth ``cdf``, pass ``cdf`` and a
    ``support`` carrying all its mass: the substitution u = F(x) gives
    int g du = int dC-factor(F(x)) dx, a smooth integral, whereas g itself has
    logarithmic end-point behaviour on (0, 1).
    """
    fam = get_family(family)
    _verified(fam.name)
    nodes, weights = roots_legendre(order)
    if cdf is not None:
        lo, hi = support
        x = lo + (nodes + 1) / 2 * (hi - lo)
        return float((weights * (hi - lo) / 2 @ fam.dtheta_factor(cdf(x))) ** 2)
    u = (nodes + 1) / 2
    w = weights / 2
    f = np.asarray(density(quantile(u)), dtype=float)
    bad = np.flatnonzero(~(f > 0) | ~np.isfinite(f))
    if len(bad):
        raise EstimationError(f"density vanishes at quadrature node u={u[bad[0]]:.6g}")
    g = fam.dtheta_factor(u) / f
    # the integrand factorises: K = (sum_i w_i g_i)^2
    return float((w @ g) ** 2)


def copula_objective(K: float, theta: np.ndarray, lags: np.ndarray) -> Callable[[float], float]:
    target = K * theta
    logh = np.log(lags)

    def objective(d: float) -> float:
        model = np.exp(gammaln(1 - d)) * rgamma(d) * np.exp((2 * d - 1) * logh)
        return float(np.sum((target - model) ** 2))

    return objective


def estimate_d_copula(series, config: CopulaConfig | None = None) -> EstimateResult:
    """Copula-based estimate of d from a complete array or a :class:`GappySeries`."""
    config = config or CopulaConfig()
    if not isinstance(series, GappySeries):
        series = GappySeries.from_nan(series)
    config.validate(len(series))
    seq = theta_sequence(series, config)
    if len(seq.lags) < 5:
        raise EstimationError(f"only {len(seq.lags)} usable lags; need at least 5")
    margins = KdeMargins(series.observed_values, config.density_bandwidth, config.quantile)
    if config.quantile == "kde":
        K = khat(config.family, margins.density, margins.quantile, config.quad_order,
                 cdf=margins.cdf, support=margins.support())
    else:
        K = khat(config.family, margins.density, margins.quantile, config.quad_order)

    objective = copula_objective(K, seq.theta_hat, seq.lags)
    grid = np.linspace(D_LOWER, D_UPPER, int(round((D_UPPER - D_LOWER) / GRID_STEP)) + 1)
    model = (np.exp(gammaln(1 - grid)) * rgamma(grid))[:, None] * \
        np.exp((2 * grid[:, None] - 1) * np.log(seq.lags)[None, :])
    values = np.sum((K * seq.theta_hat[None, :] - model) ** 2, axis=1)
    d, val, pinned = minimize_d(objective, values)
    name = "copula-" + get_family(config.family).name
    return EstimateResult(d, name, config.m, converged=not pinned, objective_at_opt=val,
                          reason="boundary" if pinned else None,
                          diagnostics={"khat": K, "lags": seq.lags.tolist(),
                                       "theta_hat": seq.theta_hat.tolist(),
                                       "pairs_used": seq.pairs_used.tolist(),
                                       "dropped_lags": list(seq.dropped)})

"""Periodogram-based estimators of d: GPH, local Whittle and exact local Whittle."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.signal import oaconvolve

from .arfima import pi_coeffs
from .results import D_LOWER, D_UPPER, GRID_STEP, EstimateResult, EstimationError, minimize_d


@dataclass
class Periodogram:
    """Ordinates I(lambda_j) at lambda_j = 2 pi j / n, j = 1..n//2."""

    freqs: np.ndarray
    ordinates: np.ndarray
    n: int
    zero_ordinate: float

    def parseval_sum(self) -> float:
        """Sum of I over all n Fourier frequencies, rebuilt by symmetry."""
        half = self.ordinates
        if self.n % 2 == 0:
            return float(self.zero_ordinate + 2 * half[:-1].sum() + half[-1])
        return float(self.zero_ordinate + 2 * half.sum())


@dataclass(frozen=True)
class BandwidthRule:
    m: int | None = None

    def resolve(self, n: int) -> int:
        m = default_bandwidth(n) if self.m is None else int(self.m)
        if not 1 <= m < n / 2:
            raise EstimationError(f"bandwidth m={m} must satisfy 1 <= m < n/2 = {n / 2}")
        return m


def default_bandwidth(n: int) -> int:
    return int(np.floor(1 + np.sqrt(n)))


def _complete(series) -> np.ndarray:
    y = np.asarray(series, dtype=float)
    if y.ndim != 1:
        raise ValueError("series must be one-dimensional")
    if not np.all(np.isfinite(y)):
        raise EstimationError("series has missing or non-finite values; impute first")
    return y


def _rule(m) -> BandwidthRule:
    return m if isinstance(m, BandwidthRule) else BandwidthRule(m)


def periodogram(series) -> Periodogram:
    """I(lambda) = |(2 pi n)^{-1/2} sum_t y_t e^{i t lambda}|^2 via the FFT."""
    y = _complete(series)
    n = len(y)
    if n < 2:
        raise EstimationError("periodogram needs at least 2 points")
    spec = np.abs(np.fft.fft(y)) ** 2 / (2 * np.pi * n)
    j = np.arange(1, n // 2 + 1)
    return Periodogram(2 * np.pi * j / n, spec[j], n, float(spec[0]))


def _low_ordinates(y: np.ndarray, m: int) -> tuple[np.ndarray, np.ndarray]:
    pg = periodogram(y)
    lam, ords = pg.freqs[:m], pg.ordinates[:m]
    if np.any(ords <= 0):
        raise EstimationError("zero periodogram ordinate among the first m frequencies")
    return lam, ords


def gph(series, m: int | BandwidthRule | None = None) -> EstimateResult:
    """Log-periodogram regression; the slope on -2 log(2 sin(lambda/2)) is d."""
    y = _complete(series)
    m = _rule(m).resolve(len(y))
    if m < 2:
        raise EstimationError("GPH needs m >= 2")
    lam, ords = _low_ordinates(y, m)
    x = -2 * np.log(2 * np.sin(lam / 2))
    ly = np.log(ords)
    xc = x - x.mean()
    slope = float(xc @ (ly - ly.mean()) / (xc @ xc))
    resid = ly - ly.mean() - slope * xc
    return EstimateResult(slope, "gph", m, diagnostics={
        "residual_variance": float(resid @ resid / max(m - 2, 1)),
        "slope_se": float(np.sqrt(resid @ resid / max(m - 2, 1) / (xc @ xc))),
    })


def _whittle_grid(lam: np.ndarray, ords: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    grid = np.linspace(D_LOWER, D_UPPER, int(round((D_UPPER - D_LOWER) / GRID_STEP)) + 1)
    loglam = np.log(lam)
    G = np.mean(np.exp(2 * grid[:, None] * loglam[None, :]) * ords[None, :], axis=1)
    return grid, np.log(G) - 2 * grid * loglam.mean()


def local_whittle(series, m: int | BandwidthRule | None = None) -> EstimateResult:
    """argmin over |d| < 1/2 of log G(d) - 2d mean(log lambda_j),
    G(d) = mean(lambda_j^{2d} I(lambda_j))."""
    y = _complete(series)
    m = _rule(m).resolve(len(y))
    lam, ords = _low_ordinates(y, m)
    loglam = np.log(lam)
    mean_loglam = loglam.mean()

    def objective(d: float) -> float:
        return float(np.log(np.mean(np.exp(2 * d * loglam) * ords)) - 2 * d * mean_loglam)

    _, values = _whittle_grid(lam, ords)
    d, val, pinned = minimize_d(objective, values)
    return EstimateResult(d, "lw", m, converged=not pinned, objective_at_opt=val,
                          reason="boundary" if pinned else None)


def fracdiff_apply(series, d: float) -> np.ndarray:
    """z_t = sum_{j<t} pi_j(d) y_{t-j}, with pre-sample values taken as zero."""
    y = np.asarray(series, dtype=float)
    n = len(y)
    if n == 0 or d == 0:
        return y.copy()
    return oaconvolve(y, pi_coeffs(d, n))[:n]


def elw(series, m: int | BandwidthRule | None = None) -> EstimateResult:
    """Exact local Whittle on the series shifted by its first value.

    The fitted series is Y_t - Y_1 for t = 2..n, i.e. the initial value is
    treated as known. For each candidate d the periodogram of the
    d-differenced series is recomputed; G(d) is the plain mean of its first m
    ordinates, because (1 - L)^d already removes the lambda^{-2d} pole.
    """
    y = _complete(series)
    if len(y) < 3:
        raise EstimationError("ELW needs at least 3 points")
    x = y[1:] - y[0]
    n = len(x)
    m = _rule(m).resolve(n)
    lam = 2 * np.pi * np.arange(1, m + 1) / n
    mean_loglam = np.log(lam).mean()
    scale = 2 * np.pi * n

    def objective(d: float) -> float:
        dft = np.fft.rfft(fracdiff_apply(x, d))[1:m + 1]
        G = np.mean((dft.real ** 2 + dft.imag ** 2) / scale)
        if not G > 0:
            return np.inf
        return float(np.log(G) - 2 * d * mean_loglam)

    d, val, pinned = minimize_d(objective)
    return EstimateResult(d, "elw", m, converged=not pinned, objective_at_opt=val,
                          reason="boundary" if pinned else None)

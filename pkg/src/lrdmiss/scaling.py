"""Time-domain scaling estimators: rescaled range (R/S) and DFA."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .results import EstimateResult, EstimationError

DEFAULT_RS_WINDOWS = (16, 32, 64, 128, 256, 512)


@dataclass(frozen=True)
class RsConfig:
    window_sizes: tuple[int, ...] = DEFAULT_RS_WINDOWS
    stride: int | None = None  # None: non-overlapping (stride = k)

    def validate(self, n: int) -> None:
        ks = self.window_sizes
        if len(set(ks)) < 3:
            raise ValueError("R/S needs at least 3 distinct window sizes")
        if list(ks) != sorted(set(ks)) or min(ks) < 8:
            raise ValueError("window sizes must be increasing and >= 8")
        if max(ks) > n:
            raise ValueError(f"largest window {max(ks)} exceeds series length {n}")
        if self.stride is not None and self.stride < 1:
            raise ValueError("stride must be positive")


@dataclass(frozen=True)
class DfaConfig:
    degree: int = 0  # nu; boxes are detrended by a polynomial of degree nu + 1
    box_sizes: tuple[int, ...] = tuple(range(50, 101))

    def validate(self, n: int) -> None:
        if self.degree < 0:
            raise ValueError("degree must be nonnegative")
        if not self.box_sizes:
            raise ValueError("need at least one box size")
        if max(self.box_sizes) + 1 > n:
            raise ValueError("box larger than the series")
        if min(self.box_sizes) < self.degree + 2:
            raise ValueError("boxes too small for the detrending polynomial")

    @classmethod
    def from_range(cls, start: int, stop: int, degree: int = 0) -> "DfaConfig":
        return cls(degree=degree, box_sizes=tuple(range(start, stop + 1)))


@dataclass
class FluctuationTable:
    m: np.ndarray
    F2: np.ndarray
    L: np.ndarray = field(init=False)

    def __post_init__(self) -> None:
        with np.errstate(divide="ignore"):
            self.L = 0.5 * np.log(self.F2)


def _ols_slope(x: np.ndarray, y: np.ndarray) -> tuple[float, float]:
    xc = x - x.mean()
    yc = y - y.mean()
    slope = float(xc @ yc / (xc @ xc))
    ss_tot = yc @ yc
    resid = yc - slope * xc
    r2 = float(1 - resid @ resid / ss_tot) if ss_tot > 0 else 1.0
    return slope, r2


def _complete(series) -> np.ndarray:
    y = np.asarray(series, dtype=float)
    if not np.all(np.isfinite(y)):
        raise EstimationError("series has missing or non-finite values; impute first")
    return y


def rs_statistic(window) -> float:
    """(max - min of x_t - (t/k) x_k) / s, with x_t partial sums of the window."""
    w = np.asarray(window, dtype=float)
    k = len(w)
    if k < 2:
        raise ValueError("window needs at least 2 points")
    s = w.std(ddof=1)
    if not s > 0:
        raise EstimationError("zero variance window")
    x = np.cumsum(w)
    adj = x - np.arange(1, k + 1) / k * x[-1]
    return float((adj.max() - adj.min()) / s)


def _rs_windows(y: np.ndarray, k: int, stride: int) -> np.ndarray:
    """R/S of every length-k window starting at 0, stride, 2*stride, ..."""
    starts = np.arange(0, len(y) - k + 1, stride)
    W = y[starts[:, None] + np.arange(k)[None, :]]
    s = W.std(axis=1, ddof=1)
    x = np.cumsum(W, axis=1)
    adj = x - (np.arange(1, k + 1) / k)[None, :] * x[:, -1:]
    rng = adj.max(axis=1) - adj.min(axis=1)
    with np.errstate(divide="ignore", invalid="ignore"):
        return np.where(s > 0, rng / s, np.nan)


def rs_estimate(series, config: RsConfig | None = None) -> EstimateResult:
    """Regress log R_{t,k} on log k over all windows; d = slope - 1/2."""
    y = _complete(series)
    config = config or RsConfig()
    config.validate(len(y))
    logk, logr = [], []
    for k in config.window_sizes:
        r = _rs_windows(y, k, config.stride or k)
        r = r[np.isfinite(r)]
        if len(r) == 0:
            raise EstimationError(f"all windows of size {k} are constant")
        logk.append(np.full(len(r), np.log(k)))
        logr.append(np.log(r))
    slope, r2 = _ols_slope(np.concatenate(logk), np.concatenate(logr))
    return EstimateResult(slope - 0.5, "rs", len(config.window_sizes),
                          diagnostics={"r_squared": r2, "windows": float(sum(map(len, logk)))})


def _residual_projector(size: int, degree: int) -> np.ndarray:
    """Q = I - D (D'D)^{-1} D' for the polynomial design on 1..size, via QR."""
    t = np.arange(1, size + 1, dtype=float)
    # centred, scaled abscissa: same column space, better conditioned
    u = (t - t.mean()) / t.std()
    D = np.vander(u, degree + 2, increasing=True)
    Qd, _ = np.linalg.qr(D)
    return np.eye(size) - Qd @ Qd.T


def dfa_fluctuation(series, config: DfaConfig | None = None) -> FluctuationTable:
    """Detrended variance F^2(m) of the integrated series over boxes of m + 1 points.

    Non-overlapping boxes from the start; a trailing partial box is dropped.
    """
    y = _complete(series)
    config = config or DfaConfig()
    config.validate(len(y))
    R = np.cumsum(y)
    n = len(y)
    F2 = np.empty(len(config.box_sizes))
    for idx, m in enumerate(config.box_sizes):
        size = m + 1
        k = n // size
        boxes = R[:k * size].reshape(k, size)
        resid = boxes @ _residual_projector(size, config.degree)  # Q symmetric
        F2[idx] = np.mean(np.sum(resid ** 2, axis=1) / size)
    return FluctuationTable(np.asarray(config.box_sizes), F2)


def dfa_estimate(series, config: DfaConfig | None = None) -> EstimateResult:
    """Regress log sqrt(F^2(m)) on log m; d = slope - 1/2."""
    table = dfa_fluctuation(series, config)
    if len(table.m) < 2:
        raise ValueError("need at least two box sizes for the regression")
    # residuals of an exactly polynomial profile are rounding noise, not signal
    scale = np.mean(np.cumsum(np.asarray(series, dtype=float)) ** 2)
    if np.any(table.F2 <= 1e-24 * scale):
        raise EstimationError("zero fluctuation in the regression range")
    slope, r2 = _ols_slope(np.log(table.m), table.L)
    return EstimateResult(slope - 0.5, "dfa", len(table.m), diagnostics={"r_squared": r2})

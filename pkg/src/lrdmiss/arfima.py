"""Gaussian ARFIMA(p, d, q) processes.

The model is

    phi(L) Y_t = theta(L) (1 - L)^{-d} eps_t,

with ``phi(z) = 1 - phi_1 z - ... - phi_p z^p``, ``theta(z) = 1 + theta_1 z + ...
+ theta_q z^q`` and ``Var(eps_t) = sigma2``. Samples are drawn exactly from the
stationary Gaussian law by circulant embedding, falling back to a Cholesky
factor of the Toeplitz covariance.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
import scipy.linalg
from scipy.signal import lfilter
from scipy.special import gammaln, rgamma

from .streams import SeedLike, as_generator


class ModelError(ValueError):
    """An ARFIMA specification violates the model invariants."""


class TruncationError(RuntimeError):
    """The short-memory impulse response did not decay within the length cap."""


class SimulationError(RuntimeError):
    """Neither circulant embedding nor Cholesky produced a sample."""


def _check_d(d: float, lo: float = -1.0, hi: float = 0.5) -> None:
    if not (lo < d < hi) or not np.isfinite(d):
        raise ValueError(f"d must lie in ({lo}, {hi}), got {d!r}")


@dataclass(frozen=True)
class ArfimaModel:
    d: float
    phi: tuple[float, ...] = ()
    theta: tuple[float, ...] = ()
    sigma2: float = 1.0

    def __post_init__(self) -> None:
        object.__setattr__(self, "phi", tuple(float(x) for x in self.phi))
        object.__setattr__(self, "theta", tuple(float(x) for x in self.theta))
        object.__setattr__(self, "d", float(self.d))
        object.__setattr__(self, "sigma2", float(self.sigma2))
        try:
            _check_d(self.d)
        except ValueError as exc:
            raise ModelError(str(exc)) from None
        if not (self.sigma2 > 0 and np.isfinite(self.sigma2)):
            raise ModelError("sigma2 must be positive and finite")
        if not all(np.isfinite(self.phi + self.theta)):
            raise ModelError("coefficients must be finite")
        if self.p:
            # np.roots wants highest degree first: -phi_p z^p - ... - phi_1 z + 1
            roots = np.roots(np.r_[-np.asarray(self.phi)[::-1], 1.0])
            if np.any(np.abs(roots) <= 1.0 + 1e-8):
                raise ModelError("AR polynomial has a root on or inside the unit circle")

    @property
    def p(self) -> int:
        return len(self.phi)

    @property
    def q(self) -> int:
        return len(self.theta)

    @property
    def label(self) -> str:
        return f"ARFIMA({self.p},{self.d:g},{self.q})"

    def to_dict(self) -> dict:
        return {"p": self.p, "d": self.d, "q": self.q, "phi": list(self.phi),
                "theta": list(self.theta), "sigma2": self.sigma2}

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)

    @classmethod
    def from_dict(cls, spec: dict) -> "ArfimaModel":
        phi = tuple(spec.get("phi", ()))
        theta = tuple(spec.get("theta", ()))
        if "p" in spec and int(spec["p"]) != len(phi):
            raise ModelError(f"p={spec['p']} but {len(phi)} AR coefficients given")
        if "q" in spec and int(spec["q"]) != len(theta):
            raise ModelError(f"q={spec['q']} but {len(theta)} MA coefficients given")
        if "d" not in spec:
            raise ModelError("model spec needs 'd'")
        return cls(d=spec["d"], phi=phi, theta=theta, sigma2=spec.get("sigma2", 1.0))


@dataclass
class AcvfTable:
    gamma: np.ndarray
    kappa_d: float

    @property
    def lags(self) -> np.ndarray:
        return np.arange(len(self.gamma))


@dataclass
class SimulatedSeries:
    values: np.ndarray
    model: ArfimaModel
    burn: int
    seed: int | None = None
    method: str = field(default="embedding")


def fracdiff_coeffs(d: float, count: int) -> np.ndarray:
    """Coefficients eta_j of (1 - L)^{-d} = sum_j eta_j L^j, j < count.

    Uses the recurrence eta_j = eta_{j-1} (j - 1 + d) / j, which equals
    Gamma(j + d) / (Gamma(j + 1) Gamma(d)) without overflow.
    """
    _check_d(d)
    if count < 1:
        raise ValueError("count must be positive")
    j = np.arange(1, count)
    return np.concatenate(([1.0], np.cumprod((j - 1 + d) / j)))


def pi_coeffs(d: float, count: int) -> np.ndarray:
    """Coefficients pi_j of (1 - L)^{d}, i.e. ``fracdiff_coeffs`` at -d."""
    _check_d(d)
    if count < 1:
        raise ValueError("count must be positive")
    j = np.arange(1, count)
    return np.concatenate(([1.0], np.cumprod((j - 1 - d) / j)))


def _fn_acvf(d: float, sigma2: float, maxlag: int) -> np.ndarray:
    # gamma(h) = sigma2 Gamma(1-2d) Gamma(h+d) / (Gamma(1-d) Gamma(d) Gamma(h+1-d))
    g0 = sigma2 * np.exp(gammaln(1 - 2 * d) - 2 * gammaln(1 - d))
    h = np.arange(1, maxlag + 1)
    return g0 * np.concatenate(([1.0], np.cumprod((h - 1 + d) / (h - d))))


def arma_psi(phi: Sequence[float], theta: Sequence[float], tol: float = 1e-15,
             max_len: int = 1 << 20) -> np.ndarray:
    """Impulse response of theta(L)/phi(L), truncated once the tail is below ``tol``."""
    b = np.r_[1.0, np.asarray(theta, float)]
    a = np.r_[1.0, -np.asarray(phi, float)]
    length = max(64, 4 * (len(a) + len(b)))
    while length <= max_len:
        impulse = np.zeros(length)
        impulse[0] = 1.0
        psi = lfilter(b, a, impulse)
        tail = np.abs(psi[-max(8, len(a)):]).max()
        if tail <= tol * np.abs(psi).max():
            return np.trim_zeros(psi, "b") if np.any(psi) else psi[:1]
        length *= 2
    raise TruncationError(f"ARMA impulse response not below {tol:g} after {max_len} terms")


def arfima_acvf(model: ArfimaModel, maxlag: int) -> AcvfTable:
    """Autocovariances gamma(0..maxlag) and the asymptotic constant kappa_d.

    Fractional noise uses its closed form. With ARMA parts the fractional-noise
    autocovariance is convolved with the autocovariance of the (geometrically
    decaying) ARMA impulse response, so no long-memory series is truncated.
    """
    if maxlag < 0:
        raise ValueError("maxlag must be nonnegative")
    d, s2 = model.d, model.sigma2
    theta1 = 1.0 + sum(model.theta)
    phi1 = 1.0 - sum(model.phi)
    kappa = s2 * (theta1 / phi1) ** 2 * np.exp(gammaln(1 - 2 * d) - gammaln(1 - d)) * rgamma(d)
    if model.p == 0 and model.q == 0:
        return AcvfTable(_fn_acvf(d, s2, maxlag), float(kappa))

    psi = arma_psi(model.phi, model.theta)
    T = len(psi)
    c = np.correlate(psi, psi, mode="full")  # lags -(T-1)..(T-1), symmetric
    g = _fn_acvf(d, s2, maxlag + T - 1)
    ext = g[np.abs(np.arange(-(T - 1), maxlag + T))]
    gamma = np.convolve(ext, c, mode="valid")
    return AcvfTable(gamma, float(kappa))


def _embedding_sample(gamma: np.ndarray, rng: np.random.Generator) -> np.ndarray | None:
    N = len(gamma) - 1
    c = np.concatenate((gamma, gamma[-2:0:-1]))
    M = len(c)
    lam = np.fft.fft(c).real
    if lam.min() < -1e-10 * lam.max():
        return None
    lam = np.clip(lam, 0.0, None)
    z = rng.standard_normal(M) + 1j * rng.standard_normal(M)
    return np.fft.fft(np.sqrt(lam / M) * z).real[:N]


def simulate_gaussian(model: ArfimaModel, n: int, burn: int = 0, seed: SeedLike = 0,
                      method: str = "auto") -> SimulatedSeries:
    """Draw ``n`` values of the stationary Gaussian process after ``burn`` discarded ones.

    ``method`` is ``"auto"`` (embedding, Cholesky if the embedding spectrum has a
    negative eigenvalue), ``"embedding"`` or ``"cholesky"``.
    """
    if n < 1 or burn < 0 or n + burn < 2:
        raise ValueError("need n >= 1, burn >= 0 and n + burn >= 2")
    if method not in ("auto", "embedding", "cholesky"):
        raise ValueError(f"unknown method {method!r}")
    rng = as_generator(seed)
    total = n + burn
    gamma = arfima_acvf(model, total).gamma

    x = None
    embed_err = "not attempted"
    if method in ("auto", "embedding"):
        x = _embedding_sample(gamma, rng)
        used = "embedding"
        if x is None:
            embed_err = "circulant embedding has a negative eigenvalue"
            if method == "embedding":
                raise SimulationError(embed_err)
    if x is None:
        used = "cholesky"
        try:
            chol = scipy.linalg.cholesky(scipy.linalg.toeplitz(gamma[:total]), lower=True)
        except np.linalg.LinAlgError as exc:
            raise SimulationError(f"{embed_err}; Cholesky failed: {exc}") from None
        x = chol @ rng.standard_normal(total)

    seed_out = int(seed) if isinstance(seed, (int, np.integer)) else None
    return SimulatedSeries(values=x[burn:], model=model, burn=burn, seed=seed_out, method=used)

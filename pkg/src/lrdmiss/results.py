"""Estimator output and the bounded one-dimensional minimizer shared by
the Whittle-type and copula estimators."""

from __future__ import annotations

from dataclasses import asdict, dataclass, field
from typing import Callable

import numpy as np
from scipy.optimize import minimize_scalar

D_LOWER, D_UPPER = -0.499, 0.499
GRID_STEP = 0.01
BOUNDARY = 0.499


class EstimationError(ValueError):
    """The estimator cannot produce a value for this input."""


@dataclass
class EstimateResult:
    d_hat: float
    method: str
    m_used: int
    converged: bool = True
    objective_at_opt: float | None = None
    reason: str | None = None
    diagnostics: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        out = asdict(self)
        out["m"] = out.pop("m_used")
        return out


def minimize_d(objective: Callable[[float], float], grid_values: np.ndarray | None = None,
               lo: float = D_LOWER, hi: float = D_UPPER, step: float = GRID_STEP,
               tol: float = 1e-6) -> tuple[float, float, bool]:
    """Grid search over [lo, hi] then bounded refinement in the best bracket.

    ``grid_values`` may hold the objective already evaluated on the grid (a
    vectorised caller computes them in one pass). Returns ``(d, R(d), pinned)``
    where ``pinned`` flags a minimiser at the edge of the search range.
    """
    grid = np.linspace(lo, hi, int(round((hi - lo) / step)) + 1)
    values = np.array([objective(d) for d in grid]) if grid_values is None else grid_values
    if not np.any(np.isfinite(values)):
        raise EstimationError("objective is not finite anywhere on the grid")
    i = int(np.nanargmin(np.where(np.isfinite(values), values, np.nan)))
    a, b = grid[max(i - 1, 0)], grid[min(i + 1, len(grid) - 1)]
    res = minimize_scalar(objective, bounds=(a, b), method="bounded",
                          options={"xatol": tol})
    d, val = float(res.x), float(res.fun)
    if not val <= values[i]:
        d, val = float(grid[i]), float(values[i])
    pinned = abs(d) >= BOUNDARY - 10 * tol
    return d, val, pinned

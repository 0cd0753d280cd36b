"""Selection of the regularization strength.

The criterion compares off-diagonal magnitudes of the empirical matrix and
a penalized estimate: the score is the mean shrinkage among entries that
got smaller minus the mean inflation among entries that got larger. The
scan solves the estimation problem across a grid of penalty strengths
(warm-starting each solve from the previous estimate), optionally smooths
the score curve with Lowess, and picks the maximizing grid point.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from .errors import DimensionMismatch, LpocError, TooFewPoints
from .matrices import CorrelationMatrix, PenaltyMatrix
from .solver import SolveReport, SolverConfig, solve_lpoc

DEFAULT_SPAN = 2.0 / 3.0


@dataclass(frozen=True, eq=False)
class LambdaScan:
    """Grid scan of the shrinkage-minus-inflation criterion."""

    grid: np.ndarray
    k_values: np.ndarray
    smoothed_k: np.ndarray | None
    chosen_lambda: float
    estimates: dict[float, CorrelationMatrix] | None = None

    def to_json_dict(self) -> dict:
        return {
            "grid": [float(x) for x in self.grid],
            "k_values": [None if not math.isfinite(v) else float(v) for v in self.k_values],
            "smoothed_k": None
            if self.smoothed_k is None
            else [None if not math.isfinite(v) else float(v) for v in self.smoothed_k],
            "chosen_lambda": float(self.chosen_lambda),
        }

    def to_csv(self) -> str:
        lines = ["lambda,k,smoothed_k"]
        for i, lam in enumerate(self.grid):
            k = self.k_values[i]
            ks = "" if not math.isfinite(k) else f"{k:.17g}"
            if self.smoothed_k is None or not math.isfinite(self.smoothed_k[i]):
                ss = ""
            else:
                ss = f"{self.smoothed_k[i]:.17g}"
            lines.append(f"{lam:.17g},{ks},{ss}")
        return "\n".join(lines) + "\n"


def k_criterion(r_tilde, r_hat) -> float:
    """Mean shrinkage minus mean inflation over off-diagonal magnitudes.

    Entries with unchanged magnitude belong to neither set; the mean over
    an empty set is 0.
    """
    a = r_tilde.values if isinstance(r_tilde, CorrelationMatrix) else np.asarray(r_tilde, float)
    b = r_hat.values if isinstance(r_hat, CorrelationMatrix) else np.asarray(r_hat, float)
    if a.shape != b.shape:
        raise DimensionMismatch(f"matrix shapes differ: {a.shape} vs {b.shape}")
    iu = np.triu_indices(a.shape[0], k=1)
    tilde = np.abs(a[iu])
    hat = np.abs(b[iu])
    shrunk = hat < tilde
    inflated = hat > tilde
    mean_shrink = float(np.mean(tilde[shrunk] - hat[shrunk])) if shrunk.any() else 0.0
    mean_inflate = float(np.mean(hat[inflated] - tilde[inflated])) if inflated.any() else 0.0
    return mean_shrink - mean_inflate


def lowess_smooth(xs, ys, span: float = DEFAULT_SPAN) -> np.ndarray:
    """Locally weighted linear regression with tricube weights.

    For each x, fits a weighted straight line through the span-nearest
    fraction of the points and evaluates it there. No robustness
    iterations.
    """
    x = np.asarray(xs, dtype=float)
    y = np.asarray(ys, dtype=float)
    if x.ndim != 1 or x.shape != y.shape:
        raise DimensionMismatch("xs and ys must be equal-length vectors")
    n = x.size
    if n < 3:
        raise TooFewPoints(f"lowess needs at least 3 points, got {n}")
    if not (0.0 < span <= 1.0):
        raise ValueError("span must lie in (0, 1]")
    if (np.diff(x) <= 0).any():
        raise ValueError("xs must be strictly increasing")
    q = max(2, int(math.ceil(span * n)))
    out = np.empty(n)
    for i in range(n):
        d = np.abs(x - x[i])
        idx = np.argsort(d, kind="stable")[:q]
        dmax = d[idx].max()
        w = (1.0 - (d[idx] / dmax) ** 3) ** 3
        dx = x[idx] - x[i]
        sw = w.sum()
        swx = float(w @ dx)
        swy = float(w @ y[idx])
        swxx = float(w @ (dx * dx))
        swxy = float(w @ (dx * y[idx]))
        denom = sw * swxx - swx * swx
        if denom <= 1e-300 * max(sw * swxx, 1.0):
            out[i] = swy / sw
        else:
            slope = (sw * swxy - swx * swy) / denom
            out[i] = (swy - slope * swx) / sw
    return out


def select_lambda(
    r_tilde: CorrelationMatrix,
    p: PenaltyMatrix,
    grid,
    n_obs: int,
    config: SolverConfig | None = None,
    smoothing: bool = False,
    span: float = DEFAULT_SPAN,
    warm_start: bool = True,
    keep_estimates: bool = False,
) -> LambdaScan:
    """Scan a lambda grid, score each estimate, and return the maximizer.

    Each grid value lambda is handed to the solver as lambda/n_obs, where
    n_obs is the number of error observations per series (T-1 for a panel
    of T periods). With warm starts, each solve begins at the previous grid
    point's estimate; a config flag forces cold starts for verification.
    Failed grid points record a score of -inf and are excluded from both
    smoothing and selection. Ties break toward the smaller lambda.
    """
    grid = np.asarray(grid, dtype=float)
    if grid.size == 0:
        raise ValueError("grid must be nonempty")
    if (np.diff(grid) <= 0).any():
        raise ValueError("grid must be strictly increasing")
    if (grid < 0).any():
        raise ValueError("grid values must be nonnegative")
    if n_obs < 1:
        raise ValueError("n_obs must be at least 1")
    base = config if config is not None else SolverConfig(lambda_eff=0.0)

    k_values = np.full(grid.size, -np.inf)
    estimates: dict[float, CorrelationMatrix] = {}
    initial = None
    for gi, lam in enumerate(grid):
        cfg = replace(base, lambda_eff=float(lam) / n_obs)
        try:
            report: SolveReport = solve_lpoc(r_tilde, p, cfg, initial=initial if warm_start else None)
        except LpocError:
            continue
        k_values[gi] = k_criterion(r_tilde, report.estimate)
        if warm_start:
            initial = report.estimate.values
        if keep_estimates:
            estimates[float(lam)] = report.estimate

    valid = np.isfinite(k_values)
    if not valid.any():
        raise LpocError("every grid point failed")
    smoothed_full = None
    scores = k_values
    if smoothing and valid.sum() >= 3:
        smoothed_valid = lowess_smooth(grid[valid], k_values[valid], span=span)
        smoothed_full = np.full(grid.size, np.nan)
        smoothed_full[valid] = smoothed_valid
        scores = np.where(valid, np.nan_to_num(smoothed_full, nan=-np.inf), -np.inf)
    chosen = float(grid[int(np.argmax(scores))])
    return LambdaScan(
        grid=grid,
        k_values=k_values,
        smoothed_k=smoothed_full,
        chosen_lambda=chosen,
        estimates=estimates if keep_estimates else None,
    )

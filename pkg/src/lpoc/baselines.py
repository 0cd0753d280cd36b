"""Competing estimators and the error-table evaluation.

Pearson here means the uncentered correlation of the error rows (error
means are zero under the model); a flag switches to centered correlations
for sensitivity checks. The shrinkage baseline blends the Pearson matrix
with the identity using an analytic intensity estimated from the data.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping

import numpy as np

from .empirical import ErrorPanel, _row_correlation
from .errors import DimensionMismatch
from .matrices import CorrelationMatrix, validate_correlation

# Intensity recipe recorded in study reports for auditability. Entry
# variances use the normal-theory value for a mean of products of
# standardized observations; the plug-in sample variance of products was
# rejected because it degenerates to zero on rank-one panels.
INTENSITY_FORMULA = (
    "sum_{i<>j} (1 + r_ij^2)/K over sum_{i<>j} r_ij^2, clamped to [0, 1]"
)

CELL_CLASSES = ("all", "true_zero", "true_nonzero")


def pearson_estimate(errors: ErrorPanel, centered: bool = False) -> CorrelationMatrix:
    """Sample correlation of error rows; uncentered unless asked otherwise."""
    return _row_correlation(errors.values, errors.labels, centered=centered)


def ledoit_wolf_estimate(errors: ErrorPanel) -> tuple[CorrelationMatrix, float]:
    """Shrink the Pearson matrix toward the identity with analytic intensity.

    Rows are standardized by their root-mean-square, so the sample
    covariance of the standardized observations is the Pearson correlation
    matrix. The intensity is the estimated total variance of its
    off-diagonal entries divided by their squared distance from the
    identity, clamped to [0, 1]; the estimate is
    intensity*I + (1-intensity)*Pearson with the diagonal pinned at 1.
    """
    v = errors.values
    k = errors.n_obs
    if k < 2:
        raise DimensionMismatch("shrinkage intensity needs at least 2 observations")
    pearson = pearson_estimate(errors)
    s = pearson.values
    off = ~np.eye(s.shape[0], dtype=bool)
    d2 = float(np.sum(s[off] ** 2))
    if d2 == 0.0:
        intensity = 0.0
    else:
        b2 = float(np.sum(1.0 + s[off] ** 2)) / k
        intensity = min(1.0, max(0.0, b2 / d2))
    est = intensity * np.eye(s.shape[0]) + (1.0 - intensity) * s
    np.fill_diagonal(est, 1.0)
    return validate_correlation(est, labels=errors.labels), intensity


@dataclass(frozen=True, eq=False)
class ErrorReport:
    """MAE/MSE per estimator, split by true-zero and true-nonzero cells."""

    metrics: dict[str, dict[str, dict[str, float]]]
    cell_counts: dict[str, int]

    def to_json_dict(self) -> dict:
        return {"cell_counts": dict(self.cell_counts), "metrics": self.metrics}

    def to_csv(self) -> str:
        lines = ["cell_class,estimator,mae,mse"]
        for cls in CELL_CLASSES:
            for name, per_class in self.metrics.items():
                m = per_class[cls]
                lines.append(f"{cls},{name},{m['mae']:.17g},{m['mse']:.17g}")
        return "\n".join(lines) + "\n"


def evaluate_estimates(
    truth: CorrelationMatrix,
    estimates: Mapping[str, CorrelationMatrix],
    zero_mask: np.ndarray,
) -> ErrorReport:
    """MAE and MSE against the truth over off-diagonal cells.

    zero_mask marks the cells whose true correlation is zero; metrics are
    reported over all off-diagonal cells and separately for the masked and
    unmasked classes. Diagonal cells are excluded throughout.
    """
    t = truth.values
    mask = np.asarray(zero_mask, dtype=bool)
    if mask.shape != t.shape:
        raise DimensionMismatch(f"zero mask shape {mask.shape} does not match {t.shape}")
    iu = np.triu_indices(t.shape[0], k=1)
    zero = mask[iu]
    classes = {"all": np.ones_like(zero, dtype=bool), "true_zero": zero, "true_nonzero": ~zero}
    counts = {cls: int(sel.sum()) for cls, sel in classes.items()}

    metrics: dict[str, dict[str, dict[str, float]]] = {}
    for name, est in estimates.items():
        e = est.values
        if e.shape != t.shape:
            raise DimensionMismatch(f"estimate {name!r} shape {e.shape} does not match {t.shape}")
        err = e[iu] - t[iu]
        per_class = {}
        for cls, sel in classes.items():
            if sel.any():
                per_class[cls] = {
                    "mae": float(np.mean(np.abs(err[sel]))),
                    "mse": float(np.mean(err[sel] ** 2)),
                }
            else:
                per_class[cls] = {"mae": float("nan"), "mse": float("nan")}
        metrics[name] = per_class
    return ErrorReport(metrics=metrics, cell_counts=counts)

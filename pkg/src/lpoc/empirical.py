"""Forecast-error extraction and the empirical correlation matrix.

Each observed series gets an independent conditional least-squares AR(1)
fit; the residuals are the forecast errors whose cross-series correlation
we want to estimate. The empirical matrix is the uncentered correlation of
those residual rows (errors have mean zero under the model), blended with
a small identity component when a strictly positive definite matrix is
required.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np

from .errors import ConstantSeries, DimensionMismatch, ZeroRow
from .matrices import CorrelationMatrix, _freeze, validate_correlation

PHI_MAX = 0.999


@dataclass(frozen=True, eq=False)
class SeriesPanel:
    """C observed series of length T (rates per period), T >= 3."""

    labels: tuple[str, ...]
    values: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        if v.ndim != 2:
            raise DimensionMismatch("panel values must be 2-dimensional")
        if len(self.labels) != v.shape[0]:
            raise DimensionMismatch(f"{len(self.labels)} labels for {v.shape[0]} rows")
        if v.shape[1] < 3:
            raise DimensionMismatch("need at least 3 periods to fit transitions")
        if not np.isfinite(v).all():
            raise DimensionMismatch("panel contains non-finite values")
        object.__setattr__(self, "labels", tuple(str(x) for x in self.labels))
        object.__setattr__(self, "values", _freeze(v))

    @property
    def n_series(self) -> int:
        return self.values.shape[0]

    @property
    def n_periods(self) -> int:
        return self.values.shape[1]


@dataclass(frozen=True, eq=False)
class AR1Params:
    """Per-series AR(1) parameters: long-run mean, persistence in [0, 1), scale.

    Fitted parameters always carry positive scales; sigma = 0 is allowed in
    the type so deterministic (noise-free) projections can be expressed.
    """

    mu: np.ndarray
    phi: np.ndarray
    sigma: np.ndarray

    def __post_init__(self):
        mu = np.atleast_1d(np.asarray(self.mu, dtype=float))
        phi = np.atleast_1d(np.asarray(self.phi, dtype=float))
        sigma = np.atleast_1d(np.asarray(self.sigma, dtype=float))
        if not (mu.shape == phi.shape == sigma.shape):
            raise DimensionMismatch("mu, phi, sigma must have equal length")
        if ((phi < 0) | (phi >= 1)).any():
            raise DimensionMismatch("phi entries must lie in [0, 1)")
        if (sigma < 0).any():
            raise DimensionMismatch("sigma entries must be nonnegative")
        for name, a in (("mu", mu), ("phi", phi), ("sigma", sigma)):
            if not np.isfinite(a).all():
                raise DimensionMismatch(f"non-finite {name}")
        object.__setattr__(self, "mu", _freeze(mu))
        object.__setattr__(self, "phi", _freeze(phi))
        object.__setattr__(self, "sigma", _freeze(sigma))

    @property
    def n_series(self) -> int:
        return self.mu.shape[0]


@dataclass(frozen=True, eq=False)
class ErrorPanel:
    """C x (T-1) forecast errors with per-series scales."""

    values: np.ndarray
    sigma: np.ndarray
    labels: tuple[str, ...] | None = None

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        s = np.atleast_1d(np.asarray(self.sigma, dtype=float))
        if v.ndim != 2:
            raise DimensionMismatch("error values must be 2-dimensional")
        if s.shape[0] != v.shape[0]:
            raise DimensionMismatch("one sigma per series required")
        if self.labels is not None:
            object.__setattr__(self, "labels", tuple(str(x) for x in self.labels))
            if len(self.labels) != v.shape[0]:
                raise DimensionMismatch("label count does not match series count")
        object.__setattr__(self, "values", _freeze(v))
        object.__setattr__(self, "sigma", _freeze(s))

    @property
    def n_series(self) -> int:
        return self.values.shape[0]

    @property
    def n_obs(self) -> int:
        return self.values.shape[1]


def fit_ar1(panel: SeriesPanel, on_constant: str = "raise") -> tuple[AR1Params, ErrorPanel]:
    """Fit g_t = mu + phi*(g_{t-1} - mu) + eps_t per series by least squares.

    The slope is clamped into [0, 0.999]; when clamping bites, the intercept
    is re-fit conditional on the clamped slope. sigma is the residual
    root-mean-square over the T-1 transitions.

    Args:
        panel: observed series.
        on_constant: "raise" errors on a series with zero residual variance;
            "floor" keeps it with sigma floored at machine epsilon.

    Returns:
        (AR1Params, ErrorPanel) with one residual column per transition.
    """
    if on_constant not in ("raise", "floor"):
        raise ValueError("on_constant must be 'raise' or 'floor'")
    g = panel.values
    n, t = g.shape
    mu = np.empty(n)
    phi = np.empty(n)
    sigma = np.empty(n)
    resid = np.empty((n, t - 1))
    for c in range(n):
        x, y = g[c, :-1], g[c, 1:]
        xc = x - x.mean()
        sxx = float(xc @ xc)
        if sxx > 0.0:
            slope = float(xc @ (y - y.mean())) / sxx
        else:
            slope = 0.0
        slope = min(max(slope, 0.0), PHI_MAX)
        intercept = float(np.mean(y - slope * x))
        r = y - intercept - slope * x
        rms = float(np.sqrt(np.mean(r * r)))
        if rms == 0.0:
            if on_constant == "raise":
                raise ConstantSeries(panel.labels[c])
            rms = float(np.finfo(float).eps)
        mu[c] = intercept / (1.0 - slope)
        phi[c] = slope
        sigma[c] = rms
        resid[c] = r
    params = AR1Params(mu=mu, phi=phi, sigma=sigma)
    return params, ErrorPanel(values=resid, sigma=sigma, labels=panel.labels)


def _row_correlation(values: np.ndarray, labels, centered: bool) -> CorrelationMatrix:
    v = np.asarray(values, dtype=float)
    if centered:
        v = v - v.mean(axis=1, keepdims=True)
    norms = np.sqrt(np.sum(v * v, axis=1))
    if (norms == 0.0).any():
        c = int(np.argmax(norms == 0.0))
        raise ZeroRow(labels[c] if labels is not None else str(c))
    u = v / norms[:, None]
    r = u @ u.T
    r = 0.5 * (r + r.T)
    np.clip(r, -1.0, 1.0, out=r)
    np.fill_diagonal(r, 1.0)
    return validate_correlation(r, labels=labels)


def r_tilde_basic(errors: ErrorPanel) -> CorrelationMatrix:
    """Uncentered correlation of error rows: entry (i,j) is the normalized
    cross-product of residual rows i and j. Positive semi-definite by
    construction (it is a Gram matrix), possibly rank-deficient."""
    return _row_correlation(errors.values, errors.labels, centered=False)


def r_tilde_pd(basic: CorrelationMatrix) -> CorrelationMatrix:
    """Blend with the identity, 0.99*basic + 0.01*I, to guarantee a minimum
    eigenvalue of at least 0.01."""
    v = 0.99 * basic.values + 0.01 * np.eye(basic.dim)
    np.fill_diagonal(v, 1.0)
    return validate_correlation(v, strict=True, labels=basic.labels)


def read_panel_csv(path, min_periods: int = 3) -> SeriesPanel:
    """Read the panel CSV format: header "label,t1,...,tT", one row per series."""
    labels, rows = _read_labelled_rows(path)
    values = np.array(rows, dtype=float)
    if values.shape[1] < min_periods:
        raise DimensionMismatch(f"{path}: need at least {min_periods} periods")
    return SeriesPanel(labels=labels, values=values)


def _read_labelled_rows(path) -> tuple[tuple[str, ...], list[list[float]]]:
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise DimensionMismatch(f"{path}: empty file") from None
        width = len(header) - 1
        if width < 1:
            raise DimensionMismatch(f"{path}: header must be label,t1,...")
        labels = []
        rows = []
        for line, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != width + 1:
                raise DimensionMismatch(f"{path}:{line}: expected {width + 1} fields")
            labels.append(row[0].strip())
            try:
                rows.append([float(x) for x in row[1:]])
            except ValueError as exc:
                raise DimensionMismatch(f"{path}:{line}: {exc}") from None
    if not rows:
        raise DimensionMismatch(f"{path}: no data rows")
    return tuple(labels), rows


def format_panel_csv(labels: tuple[str, ...], values: np.ndarray, prefix: str = "t") -> str:
    values = np.asarray(values, dtype=float)
    header = "label," + ",".join(f"{prefix}{k + 1}" for k in range(values.shape[1]))
    lines = [header]
    for lab, row in zip(labels, values):
        lines.append(lab + "," + ",".join(f"{x:.17g}" for x in row))
    return "\n".join(lines) + "\n"


def format_params_csv(labels: tuple[str, ...], params: AR1Params) -> str:
    lines = ["label,mu,phi,sigma"]
    for i, lab in enumerate(labels):
        lines.append(
            f"{lab},{params.mu[i]:.17g},{params.phi[i]:.17g},{params.sigma[i]:.17g}"
        )
    return "\n".join(lines) + "\n"


def read_params_csv(path) -> tuple[tuple[str, ...], AR1Params]:
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = [s.strip() for s in next(reader)]
        if header != ["label", "mu", "phi", "sigma"]:
            raise DimensionMismatch(f"{path}: expected header label,mu,phi,sigma")
        labels, mu, phi, sigma = [], [], [], []
        for row in reader:
            if not row:
                continue
            labels.append(row[0].strip())
            mu.append(float(row[1]))
            phi.append(float(row[2]))
            sigma.append(float(row[3]))
    if not labels:
        raise DimensionMismatch(f"{path}: no parameter rows")
    return tuple(labels), AR1Params(mu=np.array(mu), phi=np.array(phi), sigma=np.array(sigma))

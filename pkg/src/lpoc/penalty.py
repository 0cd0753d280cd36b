"""Penalty-matrix construction from pairwise covariates.

Candidate "closeness" covariates (contiguity, distance thresholds, shared
region, colonial ties, ...) arrive as boolean pair indicators. Screening
collects the empirical correlations over the pairs each covariate marks
and tests them, via a one-sample Kolmogorov-Smirnov statistic, against the
distribution a sample correlation would have if the underlying errors were
independent. Covariates that move the distribution define the penalty:
a pair is penalized only when no selected covariate links it.
"""

from __future__ import annotations

import csv
import warnings
from dataclasses import dataclass

import numpy as np
from scipy.integrate import cumulative_trapezoid
from scipy.special import kolmogorov
from scipy.stats import ks_2samp

from .empirical import ErrorPanel, r_tilde_basic
from .errors import (
    BadSampleSize,
    DimensionMismatch,
    EmptySample,
    UnknownCovariateName,
)
from .matrices import CorrelationMatrix, PenaltyMatrix

_GRID_POINTS = 20001


class NullCorrelationCdf:
    """CDF of the sample correlation of n independent bivariate-normal draws
    with true correlation zero.

    The density is proportional to (1 - r^2)^((n-4)/2) on [-1, 1]; it is
    normalized and integrated numerically on a fine grid, giving an
    invertible lookup table.
    """

    def __init__(self, n: int):
        if n < 4:
            raise BadSampleSize(f"null correlation CDF needs n >= 4, got {n}")
        self.n = int(n)
        xs = np.linspace(-1.0, 1.0, _GRID_POINTS)
        pdf = (1.0 - xs * xs) ** ((n - 4) / 2.0)
        cdf = cumulative_trapezoid(pdf, xs, initial=0.0)
        cdf /= cdf[-1]
        self._xs = xs
        self._cdf = cdf

    def __call__(self, x) -> np.ndarray | float:
        return np.interp(x, self._xs, self._cdf)

    def ppf(self, q) -> np.ndarray | float:
        return np.interp(q, self._cdf, self._xs)


def null_correlation_cdf(n: int) -> NullCorrelationCdf:
    """Null distribution of a single sample correlation under independence."""
    return NullCorrelationCdf(n)


def ks_pvalue(sample, cdf) -> tuple[float, float]:
    """One-sample Kolmogorov-Smirnov statistic and asymptotic p-value.

    D is the sup-distance between the empirical CDF of the sample and the
    given null CDF; the p-value uses the limiting Kolmogorov distribution
    with sqrt(m) scaling.
    """
    x = np.sort(np.asarray(sample, dtype=float))
    m = x.size
    if m == 0:
        raise EmptySample("cannot run a KS test on an empty sample")
    f = np.asarray(cdf(x), dtype=float)
    up = np.arange(1, m + 1) / m
    lo = np.arange(0, m) / m
    d = max(float(np.max(up - f)), float(np.max(f - lo)), 0.0)
    p = float(kolmogorov(np.sqrt(m) * d))
    return d, p


@dataclass(frozen=True, eq=False)
class CovariateTable:
    """Named boolean pair indicators over a fixed label set."""

    labels: tuple[str, ...]
    indicators: dict[str, np.ndarray]

    def __post_init__(self):
        object.__setattr__(self, "labels", tuple(str(x) for x in self.labels))
        n = len(self.labels)
        clean: dict[str, np.ndarray] = {}
        for name, m in self.indicators.items():
            a = np.asarray(m, dtype=bool)
            if a.shape != (n, n):
                raise DimensionMismatch(f"indicator {name!r} has shape {a.shape}, want ({n}, {n})")
            if (a != a.T).any():
                raise DimensionMismatch(f"indicator {name!r} is not symmetric")
            a = a.copy()
            np.fill_diagonal(a, False)
            a.setflags(write=False)
            clean[name] = a
        object.__setattr__(self, "indicators", clean)

    @property
    def dim(self) -> int:
        return len(self.labels)

    @classmethod
    def from_pairs(cls, labels, rows) -> "CovariateTable":
        """Build from (label_i, label_j, covariate, flag) rows; missing pairs are false."""
        labels = tuple(str(x) for x in labels)
        index = {lab: i for i, lab in enumerate(labels)}
        n = len(labels)
        mats: dict[str, np.ndarray] = {}
        for li, lj, name, flag in rows:
            if li not in index or lj not in index:
                missing = li if li not in index else lj
                raise DimensionMismatch(f"pair label {missing!r} not in label set")
            m = mats.setdefault(str(name), np.zeros((n, n), dtype=bool))
            i, j = index[li], index[lj]
            if i != j and flag:
                m[i, j] = m[j, i] = True
        return cls(labels=labels, indicators=mats)


@dataclass(frozen=True, eq=False)
class CovariateScreen:
    name: str
    statistic: float
    p_value: float
    pair_count: int


@dataclass(frozen=True, eq=False)
class ScreenReport:
    """Per-covariate KS results plus the selected covariate names."""

    entries: tuple[CovariateScreen, ...]
    selected: tuple[str, ...]
    threshold: float
    n: int
    null_method: str

    def to_json_dict(self) -> dict:
        return {
            "n": self.n,
            "threshold": self.threshold,
            "null_method": self.null_method,
            "covariates": [
                {
                    "name": e.name,
                    "ks_statistic": None if np.isnan(e.statistic) else e.statistic,
                    "p_value": None if np.isnan(e.p_value) else e.p_value,
                    "pair_count": e.pair_count,
                }
                for e in self.entries
            ],
            "selected": list(self.selected),
        }


def _simulated_null_sample(dim: int, n: int, replications: int, seed: int) -> np.ndarray:
    rng = np.random.default_rng(seed)
    iu = np.triu_indices(dim, k=1)
    chunks = []
    for _ in range(replications):
        panel = ErrorPanel(values=rng.standard_normal((dim, n)), sigma=np.ones(dim))
        chunks.append(r_tilde_basic(panel).values[iu])
    return np.concatenate(chunks)


def screen_covariates(
    r_tilde: CorrelationMatrix,
    table: CovariateTable,
    n: int,
    threshold: float = 0.05,
    null_method: str = "analytic",
    mc_replications: int = 200,
    mc_seed: int = 0,
) -> ScreenReport:
    """KS-test each covariate's empirical correlations against the null.

    For every indicator, pools the off-diagonal entries of r_tilde over the
    pairs the indicator marks and compares their distribution with the
    null distribution of a sample correlation computed from n independent
    observations. Covariates with p below the threshold are selected.
    Indicators marking no pairs are excluded with a warning.

    null_method "analytic" uses the closed-form null density; "simulated"
    pools entries from uncorrelated simulated panels and runs a two-sample
    test instead.
    """
    if table.dim != r_tilde.dim:
        raise DimensionMismatch(
            f"covariate table dimension {table.dim} does not match matrix dimension {r_tilde.dim}"
        )
    if null_method not in ("analytic", "simulated"):
        raise ValueError("null_method must be 'analytic' or 'simulated'")
    iu = np.triu_indices(r_tilde.dim, k=1)
    vals = r_tilde.values[iu]

    if null_method == "analytic":
        cdf = null_correlation_cdf(n)
        null_sample = None
    else:
        if n < 4:
            raise BadSampleSize(f"null simulation needs n >= 4, got {n}")
        cdf = None
        null_sample = _simulated_null_sample(r_tilde.dim, n, mc_replications, mc_seed)

    entries = []
    selected = []
    for name, ind in table.indicators.items():
        mask = ind[iu]
        count = int(mask.sum())
        if count == 0:
            warnings.warn(f"covariate {name!r} marks no pairs; excluded from screening")
            entries.append(CovariateScreen(name, float("nan"), float("nan"), 0))
            continue
        sample = vals[mask]
        if null_method == "analytic":
            stat, p = ks_pvalue(sample, cdf)
        else:
            res = ks_2samp(sample, null_sample, method="asymp")
            stat, p = float(res.statistic), float(res.pvalue)
        entries.append(CovariateScreen(name, stat, p, count))
        if p < threshold:
            selected.append(name)
    return ScreenReport(
        entries=tuple(entries),
        selected=tuple(selected),
        threshold=threshold,
        n=n,
        null_method=null_method,
    )


def build_penalty(table: CovariateTable, selected) -> PenaltyMatrix:
    """Penalty that is 0 where any selected covariate links the pair, else 1."""
    names = list(selected)
    if not names:
        raise ValueError("selected covariate list must be nonempty")
    close = np.zeros((table.dim, table.dim), dtype=bool)
    for name in names:
        if name not in table.indicators:
            raise UnknownCovariateName(name)
        close |= table.indicators[name]
    p = np.where(close, 0.0, 1.0)
    np.fill_diagonal(p, 0.0)
    return PenaltyMatrix.from_values(p)


def read_covariate_csv(path, labels) -> CovariateTable:
    """Read pair rows "label_i,label_j,covariate,value"; a leading header row
    is tolerated and skipped."""
    rows = []
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        for line, row in enumerate(reader, start=1):
            if not row:
                continue
            if len(row) != 4:
                raise DimensionMismatch(f"{path}:{line}: expected 4 fields, got {len(row)}")
            try:
                flag = bool(int(float(row[3])))
            except ValueError:
                if line == 1:
                    continue  # header row
                raise DimensionMismatch(f"{path}:{line}: value field must be 0 or 1") from None
            rows.append((row[0].strip(), row[1].strip(), row[2].strip(), flag))
    return CovariateTable.from_pairs(labels, rows)

"""Core matrix types: correlation matrices, penalty matrices, and the
symmetric positive-definite factorization used everywhere else.

A correlation matrix here is symmetric with unit diagonal, off-diagonal
entries in [-1, 1], and positive semi-definite; "strict" validation
additionally requires the minimum eigenvalue to clear a small floor so
that Cholesky factorization is guaranteed to succeed downstream.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import cho_solve
from scipy.linalg.lapack import dpotrf

from .errors import (
    BadDiagonal,
    DimensionMismatch,
    NotPositiveDefinite,
    NotPositiveSemiDefinite,
    NotSymmetric,
    OutOfRangeEntry,
)

# Entries differing by no more than this across the diagonal are treated as
# CSV round-trip noise and symmetrized by averaging; anything larger errors.
SYMMETRY_TOL = 1e-12

# Minimum eigenvalue required by strict validation.
PD_FLOOR = 1e-8

# Slack granted to the semi-definiteness test (Gram matrices built in float
# arithmetic carry eigenvalues a few ulp below zero).
_PSD_SLACK = 1e-9


def _freeze(a: np.ndarray) -> np.ndarray:
    a = np.ascontiguousarray(a, dtype=float)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class CorrelationMatrix:
    """Validated correlation matrix. Construct via :func:`validate_correlation`."""

    values: np.ndarray
    labels: tuple[str, ...] | None = None

    def __post_init__(self):
        object.__setattr__(self, "values", _freeze(self.values))

    @property
    def dim(self) -> int:
        return self.values.shape[0]


@dataclass(frozen=True, eq=False)
class PenaltyMatrix:
    """Symmetric nonnegative prior-strength matrix with zero diagonal."""

    values: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "values", _freeze(self.values))

    @property
    def dim(self) -> int:
        return self.values.shape[0]

    @classmethod
    def from_values(cls, values: np.ndarray) -> "PenaltyMatrix":
        m = np.asarray(values, dtype=float)
        if m.ndim != 2 or m.shape[0] != m.shape[1]:
            raise DimensionMismatch("penalty matrix must be square")
        bad = np.argwhere(np.abs(m - m.T) > SYMMETRY_TOL)
        if bad.size:
            i, j = bad[0]
            raise NotSymmetric((int(i), int(j)), float(abs(m[i, j] - m[j, i])))
        m = 0.5 * (m + m.T)
        if (m < 0).any():
            i, j = np.argwhere(m < 0)[0]
            raise OutOfRangeEntry((int(i), int(j)), float(m[i, j]))
        if np.abs(np.diag(m)).max(initial=0.0) > SYMMETRY_TOL:
            i = int(np.argmax(np.abs(np.diag(m)) > SYMMETRY_TOL))
            raise BadDiagonal(i, float(m[i, i]))
        np.fill_diagonal(m, 0.0)
        return cls(m)


@dataclass(frozen=True, eq=False)
class SpdFactorization:
    """Lower-triangular Cholesky factor of a symmetric PD matrix."""

    factor: np.ndarray
    log_det: float = field(init=False)

    def __post_init__(self):
        object.__setattr__(self, "factor", _freeze(self.factor))
        ld = 2.0 * float(np.sum(np.log(np.diag(self.factor))))
        object.__setattr__(self, "log_det", ld)

    @property
    def dim(self) -> int:
        return self.factor.shape[0]

    def solve(self, rhs: np.ndarray) -> np.ndarray:
        """Return M^{-1} @ rhs for the factored matrix M."""
        return cho_solve((self.factor, True), np.asarray(rhs, dtype=float))

    def inverse(self) -> np.ndarray:
        inv = self.solve(np.eye(self.dim))
        return 0.5 * (inv + inv.T)


def _cholesky_lower(m: np.ndarray) -> tuple[np.ndarray | None, int]:
    """LAPACK dpotrf wrapper; returns (lower factor, 0) or (None, bad minor)."""
    c, info = dpotrf(m, lower=1, clean=1, overwrite_a=0)
    if info != 0:
        return None, int(info)
    return c, 0


def spd_factorize(m: np.ndarray | CorrelationMatrix, pd_floor: float = 0.0) -> SpdFactorization:
    """Cholesky-factorize a symmetric matrix, exposing log-determinant and solves.

    With ``pd_floor > 0`` the matrix must additionally satisfy
    ``min eigenvalue >= pd_floor`` (tested by factorizing ``m - pd_floor*I``);
    this is the positive-definiteness test the solver applies to proposed steps.

    Raises:
        NotPositiveDefinite: naming the first failing leading minor (1-based).
    """
    values = m.values if isinstance(m, CorrelationMatrix) else np.asarray(m, dtype=float)
    if values.ndim != 2 or values.shape[0] != values.shape[1]:
        raise DimensionMismatch("matrix must be square")
    if pd_floor > 0.0:
        shifted = values - pd_floor * np.eye(values.shape[0])
        _, info = _cholesky_lower(shifted)
        if info:
            raise NotPositiveDefinite(info)
    factor, info = _cholesky_lower(values)
    if info:
        raise NotPositiveDefinite(info)
    return SpdFactorization(factor)


def validate_correlation(
    m: np.ndarray | CorrelationMatrix,
    strict: bool = False,
    labels: tuple[str, ...] | list[str] | None = None,
    pd_floor: float = PD_FLOOR,
) -> CorrelationMatrix:
    """Check correlation-matrix invariants and return the validated type.

    Symmetry violations up to ``SYMMETRY_TOL`` are repaired by averaging,
    and diagonal entries within the same tolerance of 1 are snapped to 1;
    anything larger is an error naming the first offending index. Strict
    mode requires the minimum eigenvalue to be at least ``pd_floor``.
    """
    if isinstance(m, CorrelationMatrix):
        if labels is None:
            labels = m.labels
        m = m.values
    a = np.asarray(m, dtype=float)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise DimensionMismatch("matrix must be square")
    n = a.shape[0]
    if labels is not None:
        labels = tuple(str(x) for x in labels)
        if len(labels) != n:
            raise DimensionMismatch(f"{len(labels)} labels for a {n}x{n} matrix")

    finite = np.isfinite(a)
    if not finite.all():
        i, j = np.argwhere(~finite)[0]
        raise OutOfRangeEntry((int(i), int(j)), float(a[i, j]))

    gap = np.abs(a - a.T)
    if gap.max(initial=0.0) > SYMMETRY_TOL:
        i, j = np.argwhere(gap > SYMMETRY_TOL)[0]
        if j < i:
            i, j = j, i
        raise NotSymmetric((int(i), int(j)), float(gap[i, j]))
    a = 0.5 * (a + a.T)

    diag_gap = np.abs(np.diag(a) - 1.0)
    if diag_gap.max(initial=0.0) > SYMMETRY_TOL:
        i = int(np.argmax(diag_gap > SYMMETRY_TOL))
        raise BadDiagonal(i, float(a[i, i]))
    np.fill_diagonal(a, 1.0)

    off = np.abs(a) > 1.0
    np.fill_diagonal(off, False)
    if off.any():
        i, j = np.argwhere(off)[0]
        raise OutOfRangeEntry((int(i), int(j)), float(a[i, j]))

    if strict:
        shifted = a - pd_floor * np.eye(n)
        _, info = _cholesky_lower(shifted)
        if info:
            raise NotPositiveSemiDefinite(info)
    else:
        shifted = a + _PSD_SLACK * np.eye(n)
        _, info = _cholesky_lower(shifted)
        if info:
            raise NotPositiveSemiDefinite(info)

    return CorrelationMatrix(a, labels=labels)


def read_matrix_csv(path) -> CorrelationMatrix:
    """Read the matrix CSV format: a label header row, then C rows of C fields."""
    labels, rows = _read_square_csv(path)
    return validate_correlation(np.array(rows, dtype=float), labels=labels)


def read_penalty_csv(path) -> PenaltyMatrix:
    _, rows = _read_square_csv(path)
    return PenaltyMatrix.from_values(np.array(rows, dtype=float))


def _read_square_csv(path) -> tuple[tuple[str, ...], list[list[float]]]:
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        try:
            labels = tuple(s.strip() for s in next(reader))
        except StopIteration:
            raise DimensionMismatch(f"{path}: empty matrix file") from None
        n = len(labels)
        rows = []
        for line, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != n:
                raise DimensionMismatch(f"{path}:{line}: expected {n} fields, got {len(row)}")
            try:
                rows.append([float(x) for x in row])
            except ValueError as exc:
                raise DimensionMismatch(f"{path}:{line}: {exc}") from None
    if len(rows) != n:
        raise DimensionMismatch(f"{path}: expected {n} rows, got {len(rows)}")
    return labels, rows


def format_matrix_csv(values: np.ndarray, labels: tuple[str, ...] | None = None) -> str:
    """Render a square matrix in the CSV interchange format (17 significant digits)."""
    values = np.asarray(values, dtype=float)
    n = values.shape[0]
    if labels is None:
        labels = tuple(f"v{i + 1}" for i in range(n))
    lines = [",".join(labels)]
    for row in values:
        lines.append(",".join(f"{x:.17g}" for x in row))
    return "\n".join(lines) + "\n"

"""Exception hierarchy shared by all lpoc modules.

Two broad families matter to callers (and to the CLI exit codes):
``ValidationError`` for bad inputs and contract violations, and
``NumericalError`` for failures that arise during computation on
otherwise well-formed inputs.
"""

from __future__ import annotations


class LpocError(Exception):
    """Base class for all errors raised by this package."""


class ValidationError(LpocError):
    """Input fails a documented precondition or invariant."""


class NumericalError(LpocError):
    """Numerical failure on structurally valid input."""


class NotSymmetric(ValidationError):
    def __init__(self, index: tuple[int, int], gap: float):
        self.index = index
        self.gap = gap
        super().__init__(f"matrix not symmetric at {index} (|a_ij - a_ji| = {gap:g})")


class BadDiagonal(ValidationError):
    def __init__(self, index: int, value: float):
        self.index = index
        self.value = value
        super().__init__(f"diagonal entry {index} is {value!r}, expected 1")


class OutOfRangeEntry(ValidationError):
    def __init__(self, index: tuple[int, int], value: float):
        self.index = index
        self.value = value
        super().__init__(f"entry {index} = {value!r} outside [-1, 1]")


class NotPositiveSemiDefinite(ValidationError):
    def __init__(self, index: int):
        self.index = index
        super().__init__(f"matrix is not positive semi-definite (leading minor {index})")


class NotPositiveDefinite(NumericalError):
    def __init__(self, index: int):
        self.index = index
        super().__init__(f"matrix is not positive definite (leading minor {index})")


class DimensionMismatch(ValidationError):
    pass


class ConstantSeries(ValidationError):
    def __init__(self, label: str):
        self.label = label
        super().__init__(f"series {label!r} has zero residual variance")


class ZeroRow(ValidationError):
    def __init__(self, label: str):
        self.label = label
        super().__init__(f"error row {label!r} is identically zero")


class BadSampleSize(ValidationError):
    pass


class EmptySample(ValidationError):
    pass


class TooFewPoints(ValidationError):
    pass


class UnknownCovariateName(ValidationError):
    def __init__(self, name: str):
        self.name = name
        super().__init__(f"unknown covariate {name!r}")


class UnknownLabel(ValidationError):
    def __init__(self, label: str):
        self.label = label
        super().__init__(f"unknown series label {label!r}")


class AllZeroWeights(ValidationError):
    def __init__(self, region: str, period: int):
        self.region = region
        self.period = period
        super().__init__(f"region {region!r} has zero total weight in period {period}")


class ShapeMismatch(ValidationError):
    pass


class EmptyEnsemble(ValidationError):
    pass


class StudyFailure(NumericalError):
    """More than the tolerated share of simulation replications failed."""

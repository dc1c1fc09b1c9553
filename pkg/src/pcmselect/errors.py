"""Exception hierarchy for pcmselect.

Every error raised by the library derives from :class:`PcmSelectError` so
callers (in particular the Monte Carlo harness, which must survive failing
replications) can catch one base class.
"""

from __future__ import annotations


class PcmSelectError(Exception):
    """Base class for all pcmselect errors."""


class ConstantColumn(PcmSelectError):
    """A data column has zero variance and cannot be standardized."""

    def __init__(self, name: str):
        super().__init__(f"column {name!r} is constant (zero variance)")
        self.name = name


class DecompositionFailure(PcmSelectError):
    """A matrix decomposition (SVD) did not converge."""


class SingularDesign(PcmSelectError):
    """A design matrix that must be invertible is (numerically) singular."""


class SingularSystem(PcmSelectError):
    """A structural system matrix is numerically singular."""


class MaxIterationsExceeded(PcmSelectError):
    """Coordinate descent hit the sweep cap before converging."""

    def __init__(self, sweeps: int, last_change: float):
        super().__init__(
            f"coordinate descent did not converge within {sweeps} sweeps "
            f"(last max coefficient change {last_change:.3e})"
        )
        self.sweeps = sweeps
        self.last_change = last_change


class ZeroPilot(PcmSelectError):
    """A pilot coefficient is exactly zero so its reciprocal weight is undefined."""

    def __init__(self, index):
        super().__init__(f"pilot coefficient at index {index} is exactly zero")
        self.index = index


class UnknownVertex(PcmSelectError):
    """A vertex name is not part of the graph."""

    def __init__(self, name: str):
        super().__init__(f"unknown vertex {name!r}")
        self.name = name


class OverlappingSets(PcmSelectError):
    """Vertex sets that must be disjoint overlap."""


class SearchBudgetExceeded(PcmSelectError):
    """A combinatorial search exceeded its configured evaluation cap."""


class ExplainedVarianceExceedsOne(PcmSelectError):
    """Unit-variance calibration is impossible for a vertex."""

    def __init__(self, vertex: str, value: float):
        super().__init__(
            f"parents of {vertex!r} already explain variance {value:.6f} >= 1"
        )
        self.vertex = vertex
        self.value = value


class EmptyGrid(PcmSelectError):
    """A parameter grid contains no candidates."""


class FoldTooSmall(PcmSelectError):
    """Cross-validation folds cannot be formed from the available rows."""


class EmptyInput(PcmSelectError):
    """An operation that needs at least one value received none."""


class ConfigInvalid(PcmSelectError):
    """An experiment or roles configuration failed validation."""


class DataFormatError(PcmSelectError):
    """A data file could not be parsed; carries row/column context."""

    def __init__(self, message: str, row: int | None = None, column: int | None = None):
        loc = ""
        if row is not None:
            loc = f" (row {row}" + (f", column {column})" if column is not None else ")")
        super().__init__(message + loc)
        self.row = row
        self.column = column

"""Exception taxonomy shared across the package.

Everything derives from QrdxError so callers can catch one base class.
The CLI maps these onto exit codes: ConfigError -> 2, data-shaped errors
(IoError, FormatError, SelectionError, InsufficientDataError) -> 3, and
any other QrdxError raised inside a pipeline stage -> 4.
"""


class QrdxError(Exception):
    """Base class for all errors raised by this package."""


class DomainError(QrdxError, ValueError):
    """Input outside the mathematical domain of an operation."""


class ShapeError(QrdxError, ValueError):
    """Array shape or width does not match what the operation expects."""


class RangeError(QrdxError, ValueError):
    """Value outside the admissible numeric range (e.g. features not in [0, 1])."""


class SelectionError(QrdxError, ValueError):
    """Event cannot be flattened or selected (too few jets, ambiguous lepton)."""


class InsufficientDataError(QrdxError, ValueError):
    """Not enough samples of some class to honour a split or subset request."""


class IoError(QrdxError, OSError):
    """File could not be read or written."""


class FormatError(QrdxError, ValueError):
    """File content does not parse as the expected matrix format."""


class RankError(QrdxError, ValueError):
    """Matrix has no usable spectrum (e.g. all-zero covariance)."""


class ConvergenceError(QrdxError, RuntimeError):
    """Iterative solver failed to reach its tolerance within the iteration cap."""


class DegenerateNeighborhoodError(QrdxError, ValueError):
    """Local neighbourhood system is too degenerate to solve for weights."""


class DisconnectedGraphError(QrdxError, ValueError):
    """Neighbourhood graph split into blocks that cannot support the embedding.

    Disconnected graphs are normally embedded per block and do not raise;
    this error is reserved for block structures with no usable spectrum.
    """


class SolverStallError(QrdxError, RuntimeError):
    """Dual solver exhausted its pass budget before meeting the KKT tolerance."""


class DegenerateLabelsError(QrdxError, ValueError):
    """Label vector contains a single class where two are required."""


class DivergenceError(QrdxError, RuntimeError):
    """Training loss became non-finite."""


class ConfigError(QrdxError, ValueError):
    """Configuration file or flag set is invalid."""


class StageError(QrdxError, RuntimeError):
    """A pipeline stage failed; carries the stage name for reporting."""

    def __init__(self, stage: str, message: str):
        super().__init__(f"stage '{stage}': {message}")
        self.stage = stage

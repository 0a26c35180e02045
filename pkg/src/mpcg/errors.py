"""Exception types shared across the toolkit."""


class AsymmetricInputError(ValueError):
    """A stored entry (i, j) has no matching (j, i) with the identical value."""


class MissingDiagonalError(ValueError):
    """A row lacks its diagonal entry."""


class DuplicateEntryError(ValueError):
    """The same (row, col) position was supplied more than once."""


class DimensionMismatchError(ValueError):
    """Vector length does not match the matrix dimension."""


class PrecisionMismatchError(TypeError):
    """Vector precision does not match the matrix storage precision."""


class SinglePrecisionOverflowError(OverflowError):
    """A finite value exceeds the binary32 range; the reduced stage cannot run."""


class MatrixMarketParseError(ValueError):
    """Malformed Matrix Market input; carries the offending line number."""

    def __init__(self, message: str, line_number: int):
        super().__init__(f"line {line_number}: {message}")
        self.line_number = line_number


class CgBreakdownError(ArithmeticError):
    """d'Ad <= 0 or a non-finite quantity appeared: the operand is not SPD
    at the operating precision."""


class NonpositiveDiagonalError(ValueError):
    """An operation requiring a positive diagonal met a nonpositive entry."""


class Stage2NotConvergedError(RuntimeError):
    """The full-precision refinement stage did not reach its tolerance."""


class EmptyIntersectionError(ValueError):
    """Interval intersection came out inverted; the input is inconsistent."""


class DegenerateIntervalError(ValueError):
    """Spread is undefined because the interval endpoints cancel."""


class InvalidSpecError(ValueError):
    """Graph specification parameters are internally inconsistent."""


class GraphFullError(ValueError):
    """No non-edges remain to add."""


class EmptyTrainingSetError(ValueError):
    """Normalization or model fitting received no training vectors."""


class SampleTooSmallError(ValueError):
    """The requested split would leave the train or test side empty."""


class MissingCostEntryError(LookupError):
    """A record lacks the stored cost entry for the predicted class."""

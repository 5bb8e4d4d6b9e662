"""Exception hierarchy.

Every domain error carries a short ``tag`` that the command line reports as
``error:<tag>``.
"""


class ScError(Exception):
    tag = "domain"


class BalanceError(ScError):
    """Panel is not balanced (missing unit x period cells)."""

    tag = "balance"


class ConsistencyError(ScError):
    tag = "consistency"


class ParseError(ScError):
    tag = "parse"


class RangeError(ScError, ValueError):
    tag = "range"


class ShapeError(ScError, ValueError):
    tag = "shape"


class RankError(ScError):
    tag = "rank"


class EmptyCohortError(ScError):
    tag = "empty_cohort"


class DegenerateDesignError(ScError):
    tag = "degenerate_design"


class StudyError(ScError):
    tag = "study"


class PanelIOError(ScError, OSError):
    tag = "io"


class ExpOverflowError(ScError, OverflowError):
    """Exponent of the tilted weights left the representable range.

    Usually means the treated and control feature distributions do not
    overlap, so the dual has no finite minimizer.
    """

    tag = "overflow"


class ConvergenceError(ScError):
    tag = "convergence"

    def __init__(self, message, best=None):
        super().__init__(message)
        self.best = best

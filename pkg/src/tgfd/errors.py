"""Exception types shared across the engine."""


class TgfdError(Exception):
    """Base class for all engine errors."""


class UnknownVertex(TgfdError):
    """A change or query referenced a vertex id absent from the fixed vertex set."""


class DeleteMissingEdge(TgfdError):
    """An edge deletion referenced an edge that does not exist at apply time."""


class GraphFormatError(TgfdError):
    """A snapshot or change file could not be parsed."""

    def __init__(self, message, line=None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line


class TgfdSyntaxError(TgfdError):
    """A rule definition could not be parsed."""

    def __init__(self, message, line=None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line


class UnknownVariable(TgfdError):
    """A literal or edge referenced a variable not declared in the pattern."""


class InvalidDelta(TgfdError):
    """A time interval violates 0 <= p <= q."""


class EmptyConsequent(TgfdError):
    """A rule with an empty consequent is vacuous and rejected at parse time."""


class ArityMismatch(TgfdError):
    """An axiom was instantiated with the wrong number of premises."""


class JobOutOfBounds(TgfdError):
    """A job's estimated size lies outside the given (t_l, t_u) bounds."""

    def __init__(self, job_name, size, bounds):
        super().__init__(
            f"job {job_name} size {size:.6g} outside bounds [{bounds[0]:.6g}, {bounds[1]:.6g}]"
        )
        self.job_name = job_name
        self.size = size
        self.bounds = bounds


class InsufficientPairs(TgfdError):
    """The satisfying-pair pool is smaller than the requested injection count."""

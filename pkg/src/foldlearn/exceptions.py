"""Exception and warning classes shared across the package."""


class FoldLearnError(Exception):
    """Base class for data and contract errors raised by this package."""


class ParseError(FoldLearnError, ValueError):
    """Malformed input text. Carries a 1-based line and column."""

    def __init__(self, message, line=None, column=None):
        self.line = line
        self.column = column
        if line is not None:
            message = f"{message} (line {line}, column {column})"
        super().__init__(message)


class SchemaError(FoldLearnError, ValueError):
    pass


class ConsistencyError(FoldLearnError, ValueError):
    """A predicate is used with two different arities."""


class StratificationError(FoldLearnError, ValueError):
    """A program has recursion through negation."""

    def __init__(self, message, cycle=()):
        self.cycle = tuple(cycle)
        super().__init__(message)


class ClassifierError(FoldLearnError, RuntimeError):
    pass


class ConvergenceWarning(UserWarning):
    """A learner stopped on a cap or deadlock before covering every positive."""

"""Exception hierarchy shared by every stage of the pipeline."""


class TellipsoidError(ValueError):
    """Base class for input validation failures."""


class ParseError(TellipsoidError):
    """A TSV file does not conform to its expected layout."""


class SolverError(TellipsoidError):
    """A factorization or linear solve could not be completed."""

    def __init__(self, message, minor=None):
        super().__init__(message)
        self.minor = minor

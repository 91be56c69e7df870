"""Exception types shared across the pipeline."""


class DataError(ValueError):
    """Input data violates a documented format or precondition."""


class TaxonomyError(DataError):
    """Taxonomy file is malformed, or a lookup references an unknown entry."""


class ParseError(DataError):
    """Check-in stream is malformed beyond the configured error budget."""

    def __init__(self, message: str, line_number: int | None = None):
        super().__init__(message)
        self.line_number = line_number


class EmptyAreaError(DataError):
    """An area has no check-ins, so no signature can be formed for it."""


class UndefinedMetric(ArithmeticError):
    """A statistic is mathematically undefined for the given input.

    Raised instead of returning a placeholder value so that a degenerate
    network or constant vector can never be mistaken for a finding.
    """


class UndefinedSimilarity(UndefinedMetric):
    """Jaccard similarity of two empty preference sets (0/0)."""

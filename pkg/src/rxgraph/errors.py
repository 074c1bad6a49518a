"""Package-wide exception types."""


class RxGraphError(Exception):
    """Base class for all errors raised by this package."""


class ParseError(RxGraphError):
    """A file could not be parsed; carries the offending line number."""

    def __init__(self, message, line_no=None):
        if line_no is not None:
            message = f"line {line_no}: {message}"
        super().__init__(message)
        self.line_no = line_no


class LoadError(RxGraphError):
    """A file parsed but its contents violate store invariants."""


class NotFoundError(RxGraphError):
    """An entity id does not resolve in the store."""


class ValidationError(RxGraphError):
    """A record failed validation; carries per-field messages."""

    def __init__(self, fields):
        self.fields = dict(fields)
        detail = "; ".join(f"{k}: {v}" for k, v in self.fields.items())
        super().__init__(f"invalid record: {detail}")


class GraphBuildError(RxGraphError):
    """Evidence list and candidate set are misaligned."""


class GenerationError(RxGraphError):
    """Benchmark generation could not satisfy its constraints."""


class AuditError(RxGraphError):
    """A generated benchmark failed a post-hoc audit."""

"""Exception hierarchy shared across the package."""


class IronError(Exception):
    """Base class for all package errors."""


class ParameterError(IronError, ValueError):
    """Invalid or non-finite distribution/model parameter."""


class DomainError(IronError, ValueError):
    """Argument outside the domain of a function (e.g. a probability not in (0, 1))."""


class StructuralError(IronError, ValueError):
    """Shape mismatch, rank deficiency or other malformed model input."""


class StateError(IronError, RuntimeError):
    """Operation requested on an object in the wrong state (e.g. an unconverged fit)."""


class SchemaError(IronError, ValueError):
    """Input file does not match the declared schema."""


class EmptyDataError(IronError, ValueError):
    """No usable rows remain after ingestion."""


class RefitError(IronError, RuntimeError):
    """A case-deletion or envelope refit failed."""

"""Exception types shared across the package."""


class UsageError(ValueError):
    """Bad arguments: shape mismatch, out-of-range parameter, unknown kind."""


class UndefinedMetricError(ValueError):
    """A metric has no defined value on the given records (every record skipped)."""


class ParseError(ValueError):
    """Malformed line in an input file."""

    def __init__(self, message, lineno=None):
        if lineno is not None:
            message = f"line {lineno}: {message}"
        super().__init__(message)
        self.lineno = lineno


class SchemaError(ParseError):
    """Well-formed line whose contents violate the declared dimensions."""


class NonConvergenceError(RuntimeError):
    """Iterative solver hit its iteration cap; ``best`` holds the best iterate."""

    def __init__(self, message, best=None, gradient_norm=None):
        super().__init__(message)
        self.best = best
        self.gradient_norm = gradient_norm


class NumericalError(FloatingPointError):
    """Non-finite value encountered during training."""

    def __init__(self, message, epoch=None, batch=None):
        if epoch is not None:
            message = f"{message} (epoch {epoch}, batch {batch})"
        super().__init__(message)
        self.epoch = epoch
        self.batch = batch

"""Exception hierarchy shared by all bqc modules."""


class BQCError(Exception):
    """Base class for package errors."""


class ValidationError(BQCError, ValueError):
    """An argument violates a documented precondition."""


class BindingError(ValidationError):
    """A symbolic parameter slot could not be resolved."""


class CapacityError(ValidationError):
    """A register is too small for the requested content."""


class ConditioningError(BQCError, ValueError):
    """Conditioning on an outcome whose probability is (numerically) zero."""


class ConfigurationError(BQCError, ValueError):
    """Inconsistent training or experiment configuration."""


class NumericalError(BQCError, ArithmeticError):
    """A loss or gradient became NaN or infinite."""

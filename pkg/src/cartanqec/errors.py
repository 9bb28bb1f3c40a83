"""Exception types raised across the package."""


class InvalidArgument(ValueError):
    """An input violated a documented precondition."""


class CapacityError(ValueError):
    """A construction would exceed the supported Hilbert-space dimension."""


class DegenerateChannelError(ArithmeticError):
    """The channel maps the codespace to (numerically) zero."""


class ConsistencyError(RuntimeError):
    """An internal identity failed by more than round-off allows."""


class UnsupportedString(ValueError):
    """A Pauli string has no circuit template."""

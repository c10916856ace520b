"""Exception hierarchy shared by every module."""


class QliftError(Exception):
    """Base class for all library errors."""


class DomainError(QliftError, ValueError):
    """An index lies outside the declared domain or range."""


class InvariantError(QliftError, ValueError):
    """A structural invariant (e.g. distinct reprogramming points) is violated."""


class CapacityError(QliftError, RuntimeError):
    """An enumeration or memory budget would be exceeded."""


class ConfigurationError(QliftError, ValueError):
    """Registers, layouts or output maps do not fit together."""


class ValidationError(QliftError, ValueError):
    """A user-supplied object (unitary, decision tree, ...) is malformed."""

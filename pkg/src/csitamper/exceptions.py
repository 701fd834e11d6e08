"""Exception hierarchy shared by all csitamper modules."""


class CsiTamperError(Exception):
    """Base class for every error raised by this package."""


class FormatError(CsiTamperError, ValueError):
    """A file does not carry the expected magic bytes or version."""


class CorruptError(CsiTamperError, ValueError):
    """A file header is valid but its payload is truncated or inconsistent."""


class DomainError(CsiTamperError, ValueError):
    """A value lies outside the set the operation accepts."""


class ShapeError(CsiTamperError, ValueError):
    """Array dimensions disagree."""


class EmptyInputError(CsiTamperError, ValueError):
    pass


class EmptyRequestError(CsiTamperError, ValueError):
    pass


class ConfigError(CsiTamperError, ValueError):
    pass


class StateError(CsiTamperError, RuntimeError):
    """An operation was called before the state it depends on exists."""


class InsufficientDataError(CsiTamperError, ValueError):
    pass


class DegenerateLabelsError(CsiTamperError, ValueError):
    """ROC input holds only one class."""

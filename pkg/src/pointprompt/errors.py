"""Exception types raised across the package."""


class PointPromptError(Exception):
    """Base class for all package errors."""


class ValidationError(PointPromptError, ValueError):
    """Input failed a precondition check."""


class EmptyRegion(ValidationError):
    pass


class OutOfBounds(ValidationError):
    pass


class InvalidKernelSpec(ValidationError):
    pass


class InvalidBox(ValidationError):
    pass


class DegenerateGrid(ValidationError):
    pass


class BoxTooSmall(ValidationError):
    pass


class UnnamedColor(ValidationError):
    pass


class BackendError(PointPromptError):
    def __init__(self, message, status=None):
        super().__init__(message)
        self.status = status


class BackendTimeout(BackendError):
    pass


class DecodeError(BackendError):
    pass

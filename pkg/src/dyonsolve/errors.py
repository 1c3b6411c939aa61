"""Exception types raised by the solver."""


class DyonError(Exception):
    """Base class for all solver errors."""


class DomainError(DyonError, ValueError):
    pass


class SingularRadius(DyonError, ValueError):
    pass


class InterpolationOutOfRange(DyonError, ValueError):
    pass


class GridMismatch(DyonError, ValueError):
    pass


class InvalidGrid(DyonError, ValueError):
    pass


class IntegratorStall(DyonError, RuntimeError):
    def __init__(self, message, field=None):
        super().__init__(message)
        self.field = field


class InvalidBracket(DyonError, ValueError):
    pass


class BracketNotFound(DyonError, RuntimeError):
    def __init__(self, message, field=None):
        super().__init__(message)
        self.field = field


class PreconditionError(DyonError, ValueError):
    pass


class NotConverged(DyonError, RuntimeError):
    """Iteration stopped before reaching its tolerance.

    The partial history is kept on ``trace`` (or ``history`` for Newton)
    since it is the useful diagnostic.
    """

    def __init__(self, message, trace=None, history=None):
        super().__init__(message)
        self.trace = trace
        self.history = history


class SingularJacobian(DyonError, RuntimeError):
    def __init__(self, message, node=None):
        super().__init__(message)
        self.node = node


class InsufficientSignal(DyonError, ValueError):
    pass

"""Exception hierarchy shared across colliderlab."""


class ColliderError(Exception):
    """Base class for all colliderlab errors."""


class ParameterOutOfRange(ColliderError, ValueError):
    pass


class ZeroEvidenceMass(ColliderError, ArithmeticError):
    """The evidence of a conditional query has probability zero."""

    def __init__(self, message, task_id=None):
        super().__init__(message)
        self.task_id = task_id


class DegenerateJoint(ColliderError, ArithmeticError):
    """The sampler reached a state with zero probability mass."""


class UnknownTask(ColliderError, KeyError):
    pass


class LengthMismatch(ColliderError, ValueError):
    pass


class ConstantVector(ColliderError, ValueError):
    pass


class EmptyInput(ColliderError, ValueError):
    pass


class NonFiniteObjective(ColliderError, FloatingPointError):
    pass


class TemplateSlotUnresolved(ColliderError, KeyError):
    pass


class NotNumeric(ColliderError, ValueError):
    pass


class OutOfRange(ColliderError, ValueError):
    pass


class TransportError(ColliderError):
    """Base class for failures raised while querying a model endpoint."""


class Timeout(TransportError):
    pass


class RateLimited(TransportError):
    pass


class CacheMiss(TransportError, KeyError):
    pass


class TransportFailure(TransportError):
    pass


class StoreCorruption(ColliderError):
    """A transcript file in the store does not match its key or cannot be read."""


class InputError(ColliderError, ValueError):
    """Malformed user-supplied input file; carries row-level diagnostics."""

    def __init__(self, message, problems=()):
        super().__init__(message)
        self.problems = list(problems)

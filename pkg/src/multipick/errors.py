"""Exception types raised across the package."""


class MultipickError(Exception):
    """Base class for all package errors."""


class OutOfRange(MultipickError, ValueError):
    pass


class NoClosure(MultipickError):
    """The four-bar linkage cannot assemble at the requested crank angle."""


class StepLimit(MultipickError):
    pass


class EmptyHistory(MultipickError, ValueError):
    pass


class PackingFailure(MultipickError):
    pass


class CollisionRisk(MultipickError):
    pass


class EmptyInput(MultipickError, ValueError):
    pass


class ZeroTime(MultipickError, ValueError):
    pass


class SchemaError(MultipickError, ValueError):
    pass


class InvariantViolation(MultipickError, ValueError):
    pass


class EmptyMode(MultipickError, ValueError):
    pass


class ConfigError(MultipickError, ValueError):
    pass


class IoFailure(MultipickError, OSError):
    pass

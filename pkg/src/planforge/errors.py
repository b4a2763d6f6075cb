"""Exception types shared across the package."""


class PlanforgeError(Exception):
    """Base class for all package errors."""


class NotFoundError(PlanforgeError):
    """A referenced entity does not exist."""


class PreconditionError(PlanforgeError):
    """An operation was called with arguments violating its contract."""


class DegenerateDataError(PlanforgeError):
    """Numeric input carries no usable signal (e.g. zero variance)."""


class TransportError(PlanforgeError):
    """A provider could not be reached or failed mid-request."""


class MalformedResponseError(PlanforgeError):
    """A provider answered, but the payload does not match the expected shape."""


class ConflictError(PlanforgeError):
    """Optimistic-concurrency version mismatch or constraint conflict."""

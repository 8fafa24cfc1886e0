"""Exception types shared across the package."""


class Cat0ProbeError(Exception):
    """Base class for all errors raised by cat0probe."""


class InputError(Cat0ProbeError, ValueError):
    """An argument is malformed or outside its documented range."""


class PreconditionError(Cat0ProbeError, ValueError):
    """An operation's geometric precondition does not hold for the given input."""


class BudgetExceeded(Cat0ProbeError, RuntimeError):
    """A builder would exceed the configured vertex budget."""

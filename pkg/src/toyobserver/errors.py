"""Exception types shared across the package."""


class ToyObserverError(Exception):
    """Base class for all package errors."""


class ConfigError(ToyObserverError, ValueError):
    """An invalid parameter value. ``key`` names the offending parameter."""

    def __init__(self, key: str, message: str):
        super().__init__(f"{key}: {message}")
        self.key = key


class CapacityError(ToyObserverError, RuntimeError):
    """A configured resource bound (branch cap, oracle dimension) would be exceeded."""


class LoopViolationError(ToyObserverError, RuntimeError):
    """An orbital branch target is already non-blank on the branch being split."""


class SequencingError(ToyObserverError, RuntimeError):
    """Evolution factors were applied out of order."""


class InputError(ToyObserverError, ValueError):
    """Malformed input to an operation (short stream, wrong shape, non-unitary matrix)."""


class RangeError(ToyObserverError, OverflowError):
    """A value does not fit the configured fixed-width representation."""


class InvariantError(ToyObserverError, AssertionError):
    """A checked model property or operator identity does not hold."""

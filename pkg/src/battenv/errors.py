"""Exception types raised by battenv."""


class BattenvError(Exception):
    """Base class for all battenv errors."""


class ModelSpecError(BattenvError, ValueError):
    """A chain specification violates one of its invariants."""


class IncompatibleModelError(BattenvError, ValueError):
    """Models in a pool or rollout do not share the same sizes."""


class UnknownFieldError(BattenvError, KeyError):
    """A patch targets a field that is not in the registry."""

    def __str__(self):
        return str(self.args[0]) if self.args else ""


class ShapeError(BattenvError, ValueError):
    """An input array does not have the required shape."""


class PoolDisposedError(BattenvError, RuntimeError):
    """The pool was closed; its models and workers are gone."""


class PoolBusyError(BattenvError, RuntimeError):
    """A second caller entered the pool while a call was in flight."""

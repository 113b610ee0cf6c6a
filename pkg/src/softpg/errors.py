"""Exception types raised across the package."""


class InputShapeError(ValueError):
    """Array passed to a network or head has the wrong trailing dimension."""


class PoisonedUpdateError(FloatingPointError):
    """An optimizer step was asked to apply a non-finite gradient."""


class PolicyDegenerateError(FloatingPointError):
    """A policy head produced non-finite parameters of its distribution."""


class IterationLimitError(RuntimeError):
    pass


class UsageError(RuntimeError):
    """API misuse such as stepping an environment that needs a reset."""


class ConfigError(ValueError):
    pass


class NumericalFailure(FloatingPointError):
    """A training iteration produced a non-finite loss and was rolled back."""

"""Exception hierarchy shared by the package."""


class InputError(ValueError):
    """Argument has the wrong shape, range or index."""


class UsageError(RuntimeError):
    """Operation called in a state where it is not defined."""


class NumericError(ArithmeticError):
    """Non-finite values reached an update rule."""


class DegenerateGradientError(NumericError):
    """Squared gradient norm is zero where a Polyak ratio needs it."""


class ContractViolation(ValueError):
    """Caller broke an ordering contract (e.g. f_val < f_star)."""


class ConfigError(ValueError):
    """Invalid experiment configuration."""

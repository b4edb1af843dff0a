"""Exceptions raised across the package."""


class DimensionError(ValueError):
    pass


class NotHermitianError(ValueError):
    pass


class NotNPTError(ValueError):
    """The state has a positive partial transpose; no witness can be built from it."""


class IllConditionedError(ValueError):
    pass


class ResidualTooLargeError(ValueError):
    pass


class DegenerateDenominatorError(ZeroDivisionError):
    def __init__(self, quantity: str, value: float):
        super().__init__(f"{quantity} = {value!r} is too small to divide by")
        self.quantity = quantity
        self.value = value


class InfeasibleCorruptionError(RuntimeError):
    pass


class ConfigError(ValueError):
    pass

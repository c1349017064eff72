"""Exception and warning types raised across the package."""


class FactorStrengthError(ValueError):
    """Base class for all input and estimation errors."""


class NonFiniteError(FactorStrengthError):
    def __init__(self, index):
        self.index = tuple(int(i) for i in index)
        super().__init__(f"panel contains a non-finite value at index {self.index}")


class DimensionTooSmallError(FactorStrengthError):
    pass


class ZeroColumnError(FactorStrengthError):
    def __init__(self, column):
        self.column = int(column)
        super().__init__(f"loading column {self.column} has zero norm")


class DegenerateDimError(FactorStrengthError):
    pass


class UnstableARError(FactorStrengthError):
    pass


class DimMismatchError(FactorStrengthError):
    pass


class NonPositiveDiagonalError(FactorStrengthError):
    def __init__(self, factor, value, mode="vector"):
        self.factor = int(factor)
        self.value = float(value)
        self.mode = mode
        super().__init__(
            f"non-positive diagonal entry {self.value!r} for factor {self.factor} ({mode})"
        )


class NonPositiveTraceError(FactorStrengthError):
    pass


class NonPositiveError(FactorStrengthError):
    pass


class ShapeMismatchError(FactorStrengthError):
    pass


class PanelFormatError(FactorStrengthError):
    """Raised when a panel file cannot be parsed."""


class RankDeficientWarning(UserWarning):
    pass


class NoConvergenceWarning(UserWarning):
    def __init__(self, message, delta):
        super().__init__(message)
        self.delta = float(delta)

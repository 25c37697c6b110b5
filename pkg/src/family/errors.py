"""Exception types raised by the package."""


class FamilyError(Exception):
    """Base class for all errors raised here."""


class ShapeMismatch(FamilyError, ValueError):
    pass


class ConstantColumn(FamilyError, ValueError):
    def __init__(self, block, index):
        self.block = block
        self.index = index
        super().__init__(f"column {index} of {block} has zero variance")


class NotSymmetricProblem(FamilyError, ValueError):
    pass


class EmptyVector(FamilyError, ValueError):
    pass


class ZeroVector(FamilyError, ValueError):
    pass


class NonBinaryResponse(FamilyError, ValueError):
    pass


class InfeasibleScenario(FamilyError, ValueError):
    pass


class SingularInnerMatrix(FamilyError, ArithmeticError):
    def __init__(self, message, condition=float("inf")):
        self.condition = condition
        super().__init__(f"{message} (condition estimate {condition:.3g})")


class NotConverged(FamilyError, RuntimeError):
    """Raised by strict fits; ``result`` holds the partial FitResult."""

    def __init__(self, result):
        self.result = result
        super().__init__(
            f"ADMM stopped after {result.iterations} iterations "
            f"(r={result.r_final:.3g}, s={result.s_final:.3g})"
        )

class ValidationError(ValueError):
    """Input violates a documented precondition."""


class NumericError(ArithmeticError):
    """A numerical routine failed (non-convergence, rank deficiency)."""


class NotDichotomicError(ValidationError):
    def __init__(self, eigenvalue: float):
        super().__init__(f"observable is not dichotomic: eigenvalue {eigenvalue!r} is not +-1")
        self.eigenvalue = eigenvalue

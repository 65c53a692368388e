"""Exception hierarchy.

Two families matter to callers: :class:`ValidationError` (bad input, the
CLI exits with status 2) and :class:`NumericalError` (a computation that
cannot proceed, exit status 3).
"""


class QFisherError(Exception):
    """Base class for all errors raised by this package."""


class ValidationError(QFisherError, ValueError):
    """Input violates a documented precondition."""


class NumericalError(QFisherError, ArithmeticError):
    """A well-formed computation failed numerically."""


class HermiticityError(ValidationError):
    def __init__(self, asymmetry: float, tol: float):
        self.asymmetry = asymmetry
        super().__init__(
            f"matrix is not Hermitian: max |A - A^dag| = {asymmetry:.3e} exceeds {tol:.1e}"
        )


class TraceError(ValidationError):
    pass


class PositivityError(ValidationError):
    pass


class NormalizationError(ValidationError):
    pass


class CompletenessError(ValidationError):
    pass


class ExprSyntaxError(ValidationError):
    def __init__(self, message: str, offset: int, source: str = ""):
        self.offset = offset
        self.source = source
        super().__init__(f"{message} at offset {offset}")


class UnknownIdentifierError(ExprSyntaxError):
    pass


class DomainError(NumericalError):
    """A function was evaluated outside its domain."""


class SupportError(NumericalError):
    pass


class DegenerateSupportError(SupportError):
    pass


class DegeneracyError(NumericalError):
    pass


class DecompositionMismatchError(NumericalError):
    pass


class NoInformationError(NumericalError):
    pass


class SingularFisherError(NumericalError):
    def __init__(self, message: str, null_direction=None):
        self.null_direction = null_direction
        super().__init__(message)


class LikelihoodUndefinedError(NumericalError):
    pass


class QuadratureError(NumericalError):
    pass


class ModelFileError(ValidationError):
    def __init__(self, message: str, path: str = ""):
        self.path = path
        where = f" at {path}" if path else ""
        super().__init__(f"{message}{where}")

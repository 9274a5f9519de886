"""Exception hierarchy. Each class maps to a CLI exit code."""


class ObstructionError(Exception):
    exit_code = 1


class ValidationError(ObstructionError, ValueError):
    """Bad input: malformed family, point outside a domain, etc."""

    exit_code = 2


class DegenerateFibreError(ValidationError):
    """The fibre over the point is singular (F(s, t) = 0)."""


class CapacityError(ObstructionError):
    """A table or list would exceed its configured size."""

    exit_code = 3


class NumericalError(ObstructionError, ArithmeticError):
    """A numerical routine failed an internal check."""

    exit_code = 4


class ConsistencyError(ObstructionError, AssertionError):
    """Two independent computations that must agree did not."""

    exit_code = 4

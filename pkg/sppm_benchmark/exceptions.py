"""
Typed errors raised across the package.

Precondition failures are also ValueErrors, numerical failures are also
ArithmeticErrors, so callers that only know the builtin hierarchy still
catch them.
"""

from typing import Optional


class SPPMError(Exception):
    """Base class for every error raised by sppm_benchmark"""


class NotSPD(SPPMError, ArithmeticError):
    """A nonpositive pivot was met while factorizing a matrix"""


class NonPositiveC(SPPMError, ValueError):
    pass


class NoConvergence(SPPMError, ArithmeticError):
    """An iterative routine hit its iteration cap before its tolerance"""


class BadDistribution(SPPMError, ValueError):
    pass


class IndexOutOfRange(SPPMError, IndexError):
    pass


class NonPositiveGamma(SPPMError, ValueError):
    pass


class EmptySubset(SPPMError, ValueError):
    pass


class SupportTooLarge(SPPMError, ValueError):
    pass


class StateMismatch(SPPMError, ValueError):
    """Control state variant does not belong to the correction strategy"""


class MissingConstant(SPPMError, ValueError):
    pass


class DegenerateConstants(SPPMError, ValueError):
    pass


class CertificateInvalid(SPPMError, ValueError):
    """
    One of the two inequalities required by the Lyapunov certificate fails.

    Attributes:
        inequality: 1 for the iterate inequality, 2 for the control inequality
        value: left-hand side that reached or exceeded 1
    """

    def __init__(self, inequality: int, value: float):
        self.inequality = inequality
        self.value = value
        super().__init__(
            f"Certificate inequality {inequality} fails: {value!r} >= 1")


class Mismatch(SPPMError, ArithmeticError):
    """Two quantities that must agree do not"""

    def __init__(self, what: str, expected: float, actual: float):
        self.what = what
        self.expected = expected
        self.actual = actual
        super().__init__(
            f"{what} mismatch: expected {expected!r}, got {actual!r}")


class ConfigError(SPPMError, ValueError):
    """Invalid experiment configuration, located by a dotted field path"""

    def __init__(self, field_path: str, message: str,
                 cause: Optional[Exception] = None):
        self.field_path = field_path
        self.cause = cause
        super().__init__(f"{field_path}: {message}")

"""Exception hierarchy. The CLI maps DomainError to exit code 2 and
NumericalError to exit code 3."""


class ConeHardyError(Exception):
    pass


class DomainError(ConeHardyError, ValueError):
    """Invalid input: a precondition on parameters or points is violated."""


class SupercriticalMu(DomainError):
    """mu exceeds the Hardy constant, so the indicial quadratic has no real roots."""


class DivergentTail(DomainError):
    """The convolution integral diverges at infinity."""


class NumericalError(ConeHardyError, ArithmeticError):
    """A numerical procedure failed to converge or produced an invalid value."""


class NonpositiveLHS(NumericalError):
    pass


class NoFeasibleGamma(NumericalError):
    pass


class NoFeasiblePair(NumericalError):
    pass

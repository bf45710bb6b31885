"""Exception hierarchy shared by every module of the package."""


class IPSMError(Exception):
    """Base class for all package errors."""


class ZeroRow(IPSMError, ValueError):
    pass


class NegativeEntry(IPSMError, ValueError):
    pass


class NotStochastic(IPSMError, ValueError):
    pass


class EmptySet(IPSMError, ValueError):
    pass


class TooLarge(IPSMError, ValueError):
    pass


class AllZero(IPSMError, ValueError):
    pass


class GenerationFailure(IPSMError, RuntimeError):
    """A matrix sequence could not supply the requested index."""


class NonConvergent(IPSMError, RuntimeError):
    def __init__(self, msg: str, partial: float | None = None, terms: int = 0):
        super().__init__(msg)
        self.partial = partial  # sum accumulated before giving up, a lower bound
        self.terms = terms


class AssumptionViolated(IPSMError, RuntimeError):
    pass


class DomainError(IPSMError, ValueError):
    pass


class UnknownFamily(IPSMError, KeyError):
    pass


class DimensionMismatch(IPSMError, ValueError):
    pass


class ZeroDiagonal(IPSMError, ValueError):
    pass


class InfeasibleIterate(IPSMError, RuntimeError):
    pass


class ParseError(IPSMError, ValueError):
    pass


class NonSquare(IPSMError, ValueError):
    pass


class ConfigError(IPSMError, ValueError):
    pass

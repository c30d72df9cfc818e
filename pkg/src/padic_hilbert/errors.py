"""Exception hierarchy shared by all modules."""


class PadicHilbertError(Exception):
    """Base class for every error raised by the package."""


class DomainError(PadicHilbertError, ValueError):
    """Argument outside the convergence or definition domain."""


class NonSimpleRoot(PadicHilbertError, ValueError):
    """Hensel seed is not a simple root modulo p."""


class RamifiedPrime(PadicHilbertError, ValueError):
    pass


class NoTotallyPositiveGenerator(PadicHilbertError, ValueError):
    pass


class TruncationOverflow(PadicHilbertError, ValueError):
    """An operation would need coefficients beyond the available trace window."""


class NotDepleted(PadicHilbertError, ValueError):
    """Input has support on a prime where depletion was required."""


class ConvergenceBudgetExceeded(PadicHilbertError, RuntimeError):
    """The series term budget cannot reach the requested precision."""


class SingularWeight(PadicHilbertError, ZeroDivisionError):
    """A projection denominator vanishes at this weight."""

    def __init__(self, index, message=None):
        self.index = index
        super().__init__(message or f"denominator vanishes at V-degree index {index}")


class InconsistentData(PadicHilbertError, ValueError):
    pass


class NotInSpan(PadicHilbertError, ValueError):
    pass


class IllConditioned(PadicHilbertError, ValueError):
    pass


class IdentityViolation(PadicHilbertError, AssertionError):
    """A verified identity failed; carries the first offending coefficient."""

    def __init__(self, name, where=None, residual_valuation=None):
        self.name = name
        self.where = where
        self.residual_valuation = residual_valuation
        super().__init__(f"{name} violated at {where} (residual valuation {residual_valuation})")


class ConfigError(PadicHilbertError, ValueError):
    pass

"""Exception hierarchy shared by the package."""


class AlphaHestonError(Exception):
    """Base class for every error raised by this package."""


class DomainError(AlphaHestonError, ValueError):
    """An argument lies outside the domain where a formula is defined."""


class ValidationError(AlphaHestonError, ValueError):
    """A configuration failed validation; ``violations`` lists every problem."""

    def __init__(self, violations):
        self.violations = list(violations)
        super().__init__("; ".join(self.violations))


class BlowUpError(AlphaHestonError, ArithmeticError):
    """The Riccati flow exploded before the requested horizon (moment explosion)."""

    def __init__(self, message, t=None):
        self.t = t
        super().__init__(message)


class ConeExitError(BlowUpError):
    """The Riccati flow tried to leave the half-plane ``Re(psi) <= 0``.

    Outside that half-plane the jump term of the Riccati operator is infinite,
    so leaving it is a moment explosion as well.
    """


class DivergenceError(AlphaHestonError, ArithmeticError):
    """An improper integral that should be finite diverges (Grey's condition fails)."""


class NotSupportedError(AlphaHestonError, NotImplementedError):
    """The requested operation is deliberately not implemented."""

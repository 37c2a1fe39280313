"""Exception hierarchy shared by every module of the package."""

from __future__ import annotations


class TerminalControlError(Exception):
    """Base class for all package errors."""


class NonPositiveRadius(TerminalControlError):
    pass


class OriginUndefined(TerminalControlError):
    pass


class SingularDenominator(TerminalControlError):
    pass


class DegenerateManifold(TerminalControlError):
    pass


class NonFiniteDerivative(TerminalControlError):
    pass


class GuardRadiusHit(TerminalControlError):
    def __init__(self, t: float, r: float):
        super().__init__(f"radius {r:.6g} fell below guard at t={t:.6g}")
        self.t = t
        self.r = r


class InsufficientExcitation(TerminalControlError):
    pass


class Infeasible(TerminalControlError):
    pass


class AdmissibleSetViolation(TerminalControlError):
    pass


class ConfigError(TerminalControlError):
    """Raised with every violation found, each as ``"field.path: message"``."""

    def __init__(self, violations):
        self.violations = list(violations)
        super().__init__("; ".join(self.violations))

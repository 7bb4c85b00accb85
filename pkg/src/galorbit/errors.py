"""Exception hierarchy for galorbit."""


class GalorbitError(Exception):
    """Base class for every error raised by the package."""


class DomainError(GalorbitError, ValueError):
    """An argument lies outside the domain of the operation."""


class OutsideEnergyShellError(DomainError):
    """The radicand of an eliminated momentum is negative."""

    def __init__(self, branch, radicand):
        self.branch = branch
        self.radicand = radicand
        super().__init__(
            f"{branch}-branch: point lies outside the energy shell "
            f"(radicand = {radicand:.6g} < 0)"
        )


class ExpansionSingularError(DomainError):
    """Zeroth-order radicand is not positive, so the eps-expansion is undefined."""


class ChartBoundaryError(DomainError):
    """A reduced field was evaluated too close to the boundary of its chart."""


class InconsistentAnchorError(DomainError):
    """A family anchor does not lie on the requested energy level."""


class ChartSingularError(DomainError):
    """The analytic fundamental matrix is undefined for a zero-momentum anchor."""


class ResonanceRequiredError(DomainError):
    """The resonant family was requested for a non-rational frequency ratio."""


class HypothesisViolatedError(GalorbitError):
    """The gap-matrix hypotheses of the averaging theorem fail."""

    def __init__(self, message, *, flag, det=None):
        self.flag = flag
        self.det = det
        super().__init__(message)


class ResonanceError(HypothesisViolatedError):
    """Rational frequency ratio; the averaging pipeline refuses to run."""


class QuadratureIntegrityError(GalorbitError):
    """The integrand is singular at a time that was not declared."""


class IntegrationError(GalorbitError):
    """The ODE integrator failed (step limit, step underflow, non-finite state)."""

    def __init__(self, message, t=None):
        self.t = t
        super().__init__(message if t is None else f"{message} (at t = {t:.16g})")


class NoReturnError(IntegrationError):
    """No section crossing was found within the allowed time span."""


class NonConvergenceError(GalorbitError):
    """Newton shooting did not converge."""

    def __init__(self, message, residuals=()):
        self.residuals = list(residuals)
        super().__init__(message)


class OracleDomainError(DomainError):
    """The axial turning-point equation has no positive root."""

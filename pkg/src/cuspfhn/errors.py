"""Exception hierarchy shared across the toolkit.

Numerical failures (step-size collapse, diverging Newton iterations,
quadrature trouble, ...) derive from :class:`NumericalError` so callers can
distinguish "the computation broke" from "the request was malformed"
(:class:`ConfigError` / ``ValueError``).
"""


class CuspFhnError(Exception):
    """Base class for all toolkit-specific errors."""


class ConfigError(CuspFhnError):
    """Invalid run configuration (CLI or programmatic)."""


class NumericalError(CuspFhnError):
    """A numerical procedure failed to reach its target."""


class StepSizeUnderflow(NumericalError):
    """Adaptive step size collapsed below the representable floor."""


class NonFiniteState(NumericalError):
    """State or derivative became NaN/Inf during integration."""


class NoReturn(NumericalError):
    """No Poincare-section return before the integration horizon."""


class TangencyDetected(NumericalError):
    """Section crossing too tangential to define a reliable return."""


class NewtonDiverged(NumericalError):
    """Newton/secant refinement did not converge within its budget."""


class CycleCollapsed(NumericalError):
    """Limit-cycle amplitude fell below resolvable size."""


class QuadratureFailure(NumericalError):
    """Adaptive quadrature could not meet the requested tolerance."""


class NoRootInBracket(NumericalError):
    """Bracketing root solve found no sign change inside the bracket."""


class EscapeBeforeEntry(NumericalError):
    """Trajectory left the cusp neighborhood before reaching the entry section."""


class ChartDomainError(CuspFhnError, ValueError):
    """Blowup-chart transition requested outside the chart overlap."""


class SeedOnSymmetricAxis(CuspFhnError, ValueError):
    """Seed placement requested on the invariant axis u = z = 0."""


class AsymptoteParameter(CuspFhnError, ValueError):
    """Parameter sits exactly on the asymptote where the nonsymmetric
    folded singularities are unbounded."""


class IntegerResonance(CuspFhnError, ValueError):
    """Eigenvalue ratio is a positive integer; the zero-counting problem
    is degenerate there (bounded Hermite solution)."""


class OutOfRange(CuspFhnError, ValueError):
    """Requested value lies outside the tabulated/invertible range."""

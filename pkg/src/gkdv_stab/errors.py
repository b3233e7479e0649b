"""Exception hierarchy.

Every numerical failure mode has its own class so callers (and the CLI exit
codes) can tell "the point is outside the periodic region" apart from "the
numerics were not good enough".
"""


class GkdvError(Exception):
    """Base class for all errors raised by this package."""


class NotInOmega(GkdvError):
    """The parameter point does not describe a periodic orbit below the separatrix."""


class NoWell(NotInOmega):
    """The effective potential has no local minimum for these (a, c)."""


class DegenerateTurningPoint(NotInOmega):
    """A turning point is (numerically) a double root of E = V(u)."""


class QNonPositive(GkdvError):
    """The regularized quadrature factor Q(u) vanished inside the well."""


class StencilLeftOmega(GkdvError):
    """A finite-difference stencil point fell outside the periodic region."""


class IdentityViolation(GkdvError):
    """Gradients failed the action identities; the quadrature is not trustworthy."""


class UncertainSign(GkdvError):
    """A stability bracket is too close to zero to decide its sign."""


class IntegratorTolFail(GkdvError):
    """The ODE integrator could not reach the requested tolerance."""


class FitConditioning(GkdvError):
    """Least-squares fit of the Evans function was ill conditioned."""


class StepUnderflow(GkdvError):
    """Richardson extrapolation could not find a usable step."""


class GridTooCoarse(GkdvError):
    """The discriminant scan did not resolve the periodic eigenvalues."""


class PhaseMismatch(GkdvError):
    """Parameter-derivative profiles are not consistent with a periodic phi_0."""


class ComplexRoots(NotInOmega):
    """The KdV cubic has complex roots (point outside the periodic region)."""


class DegenerateRoots(GkdvError):
    """Cubic roots coincide; the cnoidal parametrization is singular."""


class SingularConstraint(GkdvError):
    """The mass/momentum constraint Jacobian is singular."""


class BlowupDetected(GkdvError):
    """The simulated solution grew without bound."""


class ResolutionLoss(GkdvError):
    """The simulated solution is no longer resolved by the Fourier grid."""

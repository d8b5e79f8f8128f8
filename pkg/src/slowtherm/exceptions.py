"""Exception types raised by the numerical routines."""


class NumericalError(RuntimeError):
    """Base class for failures of a numerical procedure (as opposed to bad input)."""


class DegenerateKernelError(NumericalError):
    """The Liouvillian does not have a simple zero eigenvalue."""


class TracelessKernelError(NumericalError):
    """The null vector of the Liouvillian has vanishing trace and is not a state."""


class StepUnderflowError(NumericalError):
    """Adaptive step size collapsed below the allowed minimum."""


class InvariantError(NumericalError):
    """A propagated state left the set of density matrices beyond tolerance."""


class QuadratureError(NumericalError):
    """Successive quadrature refinements disagree."""


class OptimizationError(NumericalError):
    """The power optimizer failed (e.g. the optimum sits on the search box)."""


class ConvergenceError(NumericalError):
    """An iterative procedure did not converge within its cap."""

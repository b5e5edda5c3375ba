"""Exception types raised across the package."""


class PnpdaError(Exception):
    """Base class for all package errors."""


class CholeskyFailure(PnpdaError, ValueError):
    """Matrix is not (numerically) positive definite."""


class TooFewMembers(PnpdaError, ValueError):
    pass


class NonFiniteState(PnpdaError, FloatingPointError):
    """A state vector picked up NaN or Inf values (model blow-up)."""


class NonFiniteLoss(PnpdaError, FloatingPointError):
    pass


class NotPsd(PnpdaError, ValueError):
    pass


class DegeneratePlan(PnpdaError, ValueError):
    """A transport plan row carries no mass."""


class NumericalUnderflow(PnpdaError, FloatingPointError):
    pass


class MisalignedTimes(PnpdaError, ValueError):
    pass

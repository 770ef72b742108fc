"""Exception types shared across the solvers."""


class UotError(Exception):
    """Base class for solver-specific failures."""


class InfeasibleDualError(UotError, ValueError):
    """Dual constraint f + g <= C violated beyond tolerance at eps = 0."""


class MassBalanceError(UotError, ValueError):
    """Balanced solver called with measures of unequal total mass."""


class SubmodularityError(UotError, ValueError):
    """Explicit cost matrix fails the adjacent-pair submodularity check."""


class NewtonError(UotError, RuntimeError):
    """Scalar Newton solve did not reach its residual target."""


class UnsupportedEntropyError(UotError, ValueError):
    """Entropy family not supported by the requested operation."""

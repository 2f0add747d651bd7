"""Exception types raised across the package."""


class ParameterError(ValueError):
    """A design or configuration parameter lies outside its valid domain."""


class HorizonError(RuntimeError):
    """Survival mass was still above the cutoff when the transient horizon ran out."""


class ResolutionError(ValueError):
    """The Markov grid is too coarse for the requested smoothing constant."""


class ConditioningError(RuntimeError):
    """No probability mass (or no replicate) survived to the change point."""


class EstimationError(RuntimeError):
    """A Monte Carlo estimate could not be formed, e.g. every replicate was capped."""


class CalibrationError(RuntimeError):
    """The control-limit search failed to bracket or to reach the tolerance."""

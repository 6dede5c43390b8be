"""Exception types shared across the particle algorithms."""


class SeqmcError(Exception):
    """Base class for all library errors."""


class InvalidWeightError(SeqmcError):
    """A log-weight vector contains NaN."""


class ParticleCollapseError(SeqmcError):
    """All particles carry zero weight (every log-weight is -inf).

    Carries the time index ``t`` when raised from a filter step, for
    diagnosis of model/data mismatch.
    """

    def __init__(self, message: str, t: int | None = None):
        super().__init__(message)
        self.t = t


class ContractViolationError(SeqmcError):
    """A caller passed data violating a documented precondition."""


class IntegratorDivergenceError(SeqmcError):
    """The ODE integrator produced a non-finite state."""


class ToleranceError(SeqmcError):
    """ABC rejection exhausted its attempt budget with zero acceptances.

    ``min_distance`` records the smallest distance seen, to guide the
    choice of a workable tolerance.
    """

    def __init__(self, message: str, min_distance: float):
        super().__init__(message)
        self.min_distance = min_distance

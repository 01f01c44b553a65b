"""Exception types shared across the package."""


class BoostlabError(Exception):
    """Base class for all package errors."""


class InvalidInput(BoostlabError):
    """An argument violates a documented precondition."""


class ProtocolViolation(BoostlabError):
    """The query protocol was broken: out-of-order round, or a declared
    round/width budget was exceeded."""


class WeakLearnerContractViolation(BoostlabError):
    """No hypothesis available to the oracle met the required advantage.

    Carries ``best_error``, the smallest weighted error the oracle could
    achieve on the offending query.
    """

    def __init__(self, message: str, best_error: float):
        super().__init__(message)
        self.best_error = float(best_error)


class TerminationFailure(BoostlabError):
    """The booster's re-draw loop hit its retry cap, i.e. fresh samples kept
    failing the per-round error threshold at the configured sample factor."""

    def __init__(self, message: str, round_index: int, attempts: int):
        super().__init__(message)
        self.round_index = round_index
        self.attempts = attempts

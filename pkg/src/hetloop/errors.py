"""Exception hierarchy shared by all modules."""


class HetloopError(Exception):
    """Base class for every error raised by this package."""

    def to_dict(self):
        return {"error": type(self).__name__, "message": str(self)}


class SignError(HetloopError, ValueError):
    pass


class ConstraintError(HetloopError, ValueError):
    pass


class DomainError(HetloopError, ValueError):
    pass


class ConvergenceError(HetloopError, ArithmeticError):
    """Adaptive quadrature hit its subdivision limit before meeting tolerance."""

    def __init__(self, message, value=float("nan"), error=float("inf")):
        super().__init__(message)
        self.value = value
        self.error = error

    def to_dict(self):
        d = super().to_dict()
        d.update(value=self.value, error_estimate=self.error)
        return d


class UnsupportedCoeffs(HetloopError, ValueError):
    pass


class IllConditioned(HetloopError, ArithmeticError):
    pass


class DesignFailure(HetloopError, RuntimeError):
    def __init__(self, message, fitted=None):
        super().__init__(message)
        self.fitted = fitted


class EventFailure(HetloopError, RuntimeError):
    pass


class HorizonReached(HetloopError, RuntimeError):
    def __init__(self, message, trajectory=None):
        super().__init__(message)
        self.trajectory = trajectory


class LeftLoopRegion(HorizonReached):
    """Orbit crossed a saddle abscissa, so it can never close up."""


class NoReturn(HetloopError, RuntimeError):
    pass


class NoSignChange(HetloopError, ValueError):
    pass

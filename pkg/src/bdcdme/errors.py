"""Exception hierarchy shared by all solver modules."""


class CdmeError(Exception):
    """Base class for every error raised by this package."""


class NonPositiveDegradation(CdmeError, ValueError):
    pass


class AssumptionOneViolated(CdmeError, ValueError):
    pass


class AssumptionTwoViolated(CdmeError, ValueError):
    pass


class EigenSolverFailure(CdmeError, RuntimeError):
    pass


class GridMismatch(CdmeError, ValueError):
    pass


class LinearSolveFailure(CdmeError, RuntimeError):
    pass


class MollificationRequired(CdmeError, ValueError):
    pass


class InsufficientSnapshots(CdmeError, ValueError):
    pass


class PositionOutOfDomain(CdmeError, ValueError):
    pass


class DegenerateTime(CdmeError, ValueError):
    pass


class UnsupportedOrder(CdmeError, ValueError):
    pass


class IdentityViolated(CdmeError, AssertionError):
    def __init__(self, name, k, t, deviation):
        self.name, self.k, self.t, self.deviation = name, k, t, deviation
        super().__init__(f"{name} violated at k={k}, t={t}: deviation {deviation:.3e}")


class SnapshotMismatch(CdmeError, ValueError):
    pass


class ConfigError(CdmeError, ValueError):
    pass

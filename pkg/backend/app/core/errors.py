class Monge1DError(Exception):
    """Base error. `exit_code` is what the CLI exits with, `detail` what it prints."""

    exit_code = 3

    def __init__(self, detail: str):
        super().__init__(detail)
        self.detail = detail


# ---------------- Instance / input errors (exit 2) ----------------
class InstanceError(Monge1DError):
    exit_code = 2


class NonIncreasingBreakpointsError(InstanceError):
    pass


class NegativeDensityError(InstanceError):
    pass


class ZeroMassError(InstanceError):
    pass


class MassNotOneError(InstanceError):
    pass


class TooFewSamplesError(InstanceError):
    pass


class DegenerateRangeError(InstanceError):
    pass


class InvalidIntervalError(InstanceError):
    pass


class InstanceParseError(InstanceError):
    pass


class ConfigError(InstanceError):
    pass


# ---------------- Invariant violations (exit 3) ----------------
class InvariantViolation(Monge1DError):
    exit_code = 3


class MassBalanceError(InvariantViolation):
    pass


class NotLipschitzError(InvariantViolation):
    pass


class MarginalMismatchError(InvariantViolation):
    pass


class RegionNotSignDefiniteError(InvariantViolation):
    pass


class SingularIntegralError(InvariantViolation):
    pass


class OutsideIntervalError(InvariantViolation):
    pass


class DimensionMismatchError(InvariantViolation):
    pass


class NonpositiveEpsError(InvariantViolation):
    pass


class NotConvergedError(InvariantViolation):
    pass


class InfeasibleError(InvariantViolation):
    pass


class InsufficientRecordsError(InvariantViolation):
    pass


class SolverDivergedError(InvariantViolation):
    pass


class InfiniteEntropyError(InvariantViolation):
    pass

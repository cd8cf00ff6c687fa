"""Exception hierarchy shared by all reserving modules."""


class ReserveError(Exception):
    """Base class for every error raised by the package."""


class ContractParseError(ReserveError):
    """A contract document does not conform to the schema.

    The offending key is available as ``key``.
    """

    def __init__(self, key: str, message: str | None = None):
        self.key = key
        super().__init__(f"{key}: {message}" if message else key)


class ContractValidationError(ReserveError):
    """A contract parsed correctly but carries invalid numbers."""


class ConfigurationError(ReserveError):
    """Solver or simulation options are inconsistent with the contract."""


class SolverError(ReserveError):
    """A backward solver produced a non-finite value."""

    def __init__(self, time: float, message: str = "non-finite value"):
        self.time = time
        super().__init__(f"{message} at t={time!r}")


class SimulationError(ReserveError):
    """The thinning bound was exceeded during path simulation."""


class ConvergenceError(ReserveError):
    """A per-step fixed-point iteration did not converge."""

    def __init__(self, time: float, residual: float, iterations: int):
        self.time = time
        self.residual = residual
        self.iterations = iterations
        super().__init__(
            f"fixed point did not converge at t={time!r} after {iterations} "
            f"iterations (last residual {residual:.3e})"
        )


class AssumptionError(ReserveError):
    """Declared Lipschitz constants violate the solver's hypotheses."""


class EquivalenceError(ReserveError):
    """No adjustment factor restores equivalence (x/0 with x != 0)."""

    def __init__(self, time: float, numerator: float):
        self.time = time
        self.numerator = numerator
        super().__init__(
            f"equivalence infeasible at tau={time!r}: numerator {numerator!r} "
            "over a zero post-modification value"
        )


class PathMismatchError(ReserveError):
    """A path is inconsistent with the contract it is evaluated against."""

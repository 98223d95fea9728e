"""Exception types shared across the library."""


class CapacityError(ValueError):
    """An enumeration guard was exceeded (product space or coupling too large)."""


class ContractionError(ValueError):
    """A contraction coefficient required to be < 1 is >= 1."""


class DivergenceError(ArithmeticError):
    """A Monte Carlo mean is non-finite or dominated by a single heavy-tailed draw."""


class SimulationBlowupError(ArithmeticError):
    """A simulated path left the finite range.  Carries the offending step index."""

    def __init__(self, step: int, message: str = ""):
        self.step = step
        super().__init__(message or f"non-finite state at step {step}")


class KernelError(ValueError):
    """A covariance kernel failed symmetry or positive semi-definiteness checks."""


class SchemaError(ValueError):
    """An experiment configuration does not match its kind's schema."""

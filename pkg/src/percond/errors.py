"""Failure types that the CLI maps to its numeric-failure exit code."""


class NumericFailure(RuntimeError):
    """A computation failed for numerical reasons (exit code 2 in the CLI)."""


class SolverConvergenceError(NumericFailure):
    def __init__(self, message: str, residual_history=None):
        super().__init__(message)
        self.residual_history = list(residual_history or [])


class DegenerateFitError(NumericFailure):
    """Fit data cannot bracket a threshold."""


class ThresholdRangeError(NumericFailure):
    """Crossing probability never passes 1/2 inside the scanned fractions."""

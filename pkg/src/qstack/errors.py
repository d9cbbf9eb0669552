"""Exceptions shared across the learning and estimation modules."""


class DivergenceError(RuntimeError):
    """A gradient-descent update produced a non-finite or runaway iterate."""


class EstimatorError(RuntimeError):
    """The Kalman correction could not be computed (singular innovation covariance)."""

    def __init__(self, message: str, condition_number: float = float("inf")):
        super().__init__(message)
        self.condition_number = condition_number

import numpy as np

from .bases import NumericValidator


class Finite(NumericValidator):
    """Validator to ensure a scalar or array holds no NaN or infinite entries."""

    requirement = "finite"

    def check(self, values: np.ndarray) -> np.ndarray:
        return np.isfinite(values)


class Positive(NumericValidator):
    """Validator to ensure every entry is strictly greater than zero."""

    requirement = "strictly positive"

    def check(self, values: np.ndarray) -> np.ndarray:
        return values > 0


class NonNegative(NumericValidator):
    """Validator to ensure every entry is greater than or equal to zero."""

    requirement = "non-negative"

    def check(self, values: np.ndarray) -> np.ndarray:
        return values >= 0


class InRange(NumericValidator):
    """
    Validator to ensure every entry lies in the closed interval [low, high].

    An optional `error_cls` lets callers raise a more specific subclass of
    `ValidationError`, e.g. `MomentRangeError` for the moment-counting limits.
    """

    def __init__(self, low: float, high: float, error_cls=None) -> None:
        super().__init__()
        self.low = low
        self.high = high
        self.requirement = f"within [{low}, {high}]"
        if error_cls is not None:
            self.error_cls = error_cls

    def check(self, values: np.ndarray) -> np.ndarray:
        return (values >= self.low) & (values <= self.high)

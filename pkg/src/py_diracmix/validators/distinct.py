import numpy as np
from scipy.spatial.distance import pdist

from ..exceptions import DegenerateInputError
from .bases import Validator


class DistinctRows(Validator):
    """
    Validator to ensure the rows of a location matrix are pairwise distinct.

    A 1-D array is read as L scalar locations. Rows closer than `atol` in the
    Euclidean norm count as coincident.
    """

    def __init__(self, atol: float = 0.0) -> None:
        super().__init__()
        self.atol = atol

    def validate(self, value: np.ndarray, func_name: str, param_name: str) -> None:
        """
        Checks that no two rows of value coincide.

        Args:
            value (numpy.ndarray): An (L, N) matrix or a length-L vector.
            func_name (str): The name of the function being validated.
            param_name (str): The name of the parameter being validated.

        Raises:
            DegenerateInputError: If two rows coincide.
            TypeError: If the value cannot be read as a real matrix.
        """
        try:
            rows = np.asarray(value, dtype=float)
        except (TypeError, ValueError):
            raise TypeError(
                "Validator 'DistinctRows' can only be used on real matrices, but "
                f"function '{func_name}' got type '{type(value).__name__}' "
                f"for parameter '{param_name}'"
            )

        if rows.ndim == 1:
            rows = rows[:, None]

        if len(rows) < 2:
            return

        if np.min(pdist(rows)) <= self.atol:
            raise DegenerateInputError(
                f"Parameter '{param_name}' must contain pairwise distinct locations "
                f"for function '{func_name}'."
            )

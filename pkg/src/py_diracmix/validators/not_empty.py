from collections.abc import Sized

import numpy as np

from ..exceptions import ValidationError
from .bases import Validator


class NotEmpty(Validator):
    """
    Validator for sequences, tables and arrays that must hold at least one entry.

    Arrays count by total size, so an array of shape (2, 0) is empty although
    its `len()` is 2.
    """

    @staticmethod
    def size_of(value: Sized) -> int:
        if isinstance(value, np.ndarray):
            return int(value.size)
        return len(value)

    def validate(self, value: Sized, func_name: str, param_name: str) -> None:
        if not isinstance(value, Sized):
            raise TypeError(
                "Validator 'NotEmpty' can only be used on types that support len() "
                f"(collections.abc.Sized), but function '{func_name}' "
                f"got type '{type(value).__name__}' for parameter '{param_name}'."
            )

        if self.size_of(value) == 0:
            raise ValidationError(
                f"Parameter '{param_name}' cannot be empty for function '{func_name}'."
            )

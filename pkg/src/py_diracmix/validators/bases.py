import abc
from typing import Any

import numpy as np

from ..exceptions import ValidationError


class Validator(abc.ABC):
    """Base class for all validators."""

    @abc.abstractmethod
    def validate(self, value: Any, func_name: str, param_name: str) -> None:
        """
        Performs validation on the given value.

        Args:
            value (Any): The value of the argument to validate.
            func_name (str): The name of the function being validated.
            param_name (str): The name of the parameter being validated.

        Raises:
            ValidationError: If validation fails.
            TypeError: If a validator is used on an incompatible type
        """
        ...  # pragma: no cover


class NumericValidator(Validator):
    """
    Base class for validators that check every element of a real scalar or array.

    Subclasses implement `check`, returning a boolean mask of the elements that
    pass, and set `requirement` to the wording used in the error message.
    """

    requirement: str = ""
    error_cls: type[ValidationError] = ValidationError

    @abc.abstractmethod
    def check(self, values: np.ndarray) -> np.ndarray: ...  # pragma: no cover

    def validate(self, value: Any, func_name: str, param_name: str) -> None:
        if value is None:
            return

        try:
            values = np.asarray(value, dtype=float)
        except (TypeError, ValueError):
            raise TypeError(
                f"Validator '{self.__class__.__name__}' can only be used on real "
                f"scalars or arrays, but function '{func_name}' got type "
                f"'{type(value).__name__}' for parameter '{param_name}'."
            )

        if not np.all(self.check(values)):
            raise self.error_cls(
                f"Parameter '{param_name}' must be {self.requirement} "
                f"for function '{func_name}'."
            )

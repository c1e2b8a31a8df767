from .distinct import DistinctRows
from .not_empty import NotEmpty
from .numeric import Finite, InRange, NonNegative, Positive

__all__ = [
    "DistinctRows",
    "Finite",
    "InRange",
    "NonNegative",
    "NotEmpty",
    "Positive",
]

"""
Multi-indices for power moments on R^N.

A multi-index is an exponent vector kappa in N_0^N; its order is the sum of its
entries and the monomial x^kappa is the product of componentwise powers. The
canonical ordering of multi-indices is graded lexicographic: ascending order,
ties broken lexicographically on the exponents.
"""

import math
from collections.abc import Iterator, Sequence
from dataclasses import dataclass
from typing import Annotated

import numpy as np

from .decorators import enforce
from .exceptions import MomentRangeError, ValidationError
from .validators import Finite, InRange, NonNegative, Positive

MAX_DIM = 16
MAX_ORDER = 16


@dataclass(frozen=True, slots=True)
class MultiIndex:
    """Exponent vector indexing a power moment."""

    exponents: tuple[int, ...]

    def __post_init__(self) -> None:
        exponents = tuple(int(k) for k in self.exponents)
        if len(exponents) < 1:
            raise ValidationError("A multi-index needs at least one exponent.")
        if any(k < 0 for k in exponents):
            raise ValidationError(
                f"Multi-index exponents must be non-negative, got {exponents}."
            )
        object.__setattr__(self, "exponents", exponents)

    @classmethod
    def of(cls, *exponents: int) -> "MultiIndex":
        return cls(tuple(exponents))

    @classmethod
    def zero(cls, dim: int) -> "MultiIndex":
        return cls((0,) * dim)

    @property
    def dim(self) -> int:
        return len(self.exponents)

    @property
    def order(self) -> int:
        return sum(self.exponents)

    @property
    def is_zero(self) -> bool:
        return self.order == 0

    def sort_key(self) -> tuple[int, tuple[int, ...]]:
        return (self.order, self.exponents)

    def __lt__(self, other: "MultiIndex") -> bool:
        return self.sort_key() < other.sort_key()

    def __add__(self, other: "MultiIndex") -> "MultiIndex":
        if self.dim != other.dim:
            raise ValidationError(
                f"Cannot add multi-indices of dimension {self.dim} and {other.dim}."
            )
        pairs = zip(self.exponents, other.exponents)
        return MultiIndex(tuple(a + b for a, b in pairs))

    def __iter__(self):
        return iter(self.exponents)

    def __len__(self) -> int:
        return len(self.exponents)

    def __str__(self) -> str:
        return "e" + "".join(str(k) for k in self.exponents)

    def to_json(self) -> list[int]:
        return list(self.exponents)


def as_multi_index(value: "MultiIndex | Sequence[int]") -> MultiIndex:
    if isinstance(value, MultiIndex):
        return value
    return MultiIndex(tuple(value))


@enforce
def enumerate_indices(
    N: Annotated[int, Positive()], M: Annotated[int, NonNegative()]
) -> list[MultiIndex]:
    """
    Returns every multi-index of dimension N and order at most M, graded
    lexicographically ordered.
    """
    return [
        MultiIndex(exponents)
        for order in range(M + 1)
        for exponents in _compositions(order, N)
    ]


def _compositions(total: int, parts: int) -> Iterator[tuple[int, ...]]:
    # Lexicographic: the first part counts up from 0.
    if parts == 1:
        yield (total,)
        return
    for head in range(total + 1):
        for tail in _compositions(total - head, parts - 1):
            yield (head, *tail)


@enforce
def count_moments(
    N: Annotated[int, Positive(), InRange(1, MAX_DIM, error_cls=MomentRangeError)],
    M: Annotated[int, InRange(0, MAX_ORDER, error_cls=MomentRangeError)],
) -> int:
    """Number of moments of dimension N up to order M, i.e. (M+N)! / (M! N!)."""
    return math.comb(M + N, N)


@enforce
def monomial(
    x: Annotated[np.ndarray, Finite()], kappa: MultiIndex | Sequence[int]
) -> float:
    """Evaluates x^kappa, the product of the componentwise powers."""
    kappa = as_multi_index(kappa)
    x = np.atleast_1d(np.asarray(x, dtype=float))
    if x.shape != (kappa.dim,):
        raise ValidationError(
            f"Point of dimension {x.size} does not match multi-index "
            f"of dimension {kappa.dim}."
        )
    return float(np.prod(x ** np.asarray(kappa.exponents)))


def exponent_matrix(indices: Sequence[MultiIndex]) -> np.ndarray:
    """Stacks multi-indices into a (P, N) integer matrix."""
    return np.array([kappa.exponents for kappa in indices], dtype=int).reshape(
        len(indices), -1
    )

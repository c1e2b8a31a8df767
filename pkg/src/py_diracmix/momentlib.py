"""
Power moments of Dirac mixtures and of scalar Gaussian (mixture) densities.

Moments are always computed from the Dirac mixture itself; the piecewise
constant companion density in `pwcdensity` exposes no moment API.
"""

import logging
import math
from collections.abc import Iterable, Mapping, Sequence
from dataclasses import InitVar, dataclass, field
from typing import Annotated, Literal

import numpy as np
from scipy.special import factorial2

from .decorators import enforce
from .exceptions import ValidationError
from .multiindex import (
    MultiIndex,
    as_multi_index,
    enumerate_indices,
    exponent_matrix,
)
from .validators import DistinctRows, Finite, NonNegative, NotEmpty, Positive

logger = logging.getLogger(__name__)

WEIGHT_SUM_TOL = 1e-12

type Weighting = Literal["uniform", "relative"] | Mapping[MultiIndex, float] | None


@dataclass(frozen=True)
class MomentTable:
    """
    Sparse table of power moments of dimension `dim` up to order `order`.

    Unspecified moments are absent from `entries`; they are never stored as 0.
    """

    dim: int
    order: int
    entries: Mapping[MultiIndex, float] = field(default_factory=dict)

    def __post_init__(self) -> None:
        if self.dim < 1:
            raise ValidationError(
                f"Moment table dimension must be >= 1, got {self.dim}."
            )
        if self.order < 0:
            raise ValidationError(f"Moment table order must be >= 0, got {self.order}.")

        entries: dict[MultiIndex, float] = {}
        for key, value in self.entries.items():
            kappa = as_multi_index(key)
            if kappa.dim != self.dim:
                raise ValidationError(
                    f"Index {kappa.exponents} does not match table "
                    f"dimension {self.dim}."
                )
            if kappa.order > self.order:
                raise ValidationError(
                    f"Index {kappa.exponents} exceeds table order {self.order}."
                )
            if not math.isfinite(value):
                raise ValidationError(f"Moment {kappa} must be finite, got {value}.")
            entries[kappa] = float(value)

        zero = MultiIndex.zero(self.dim)
        if zero in entries and abs(entries[zero] - 1.0) > WEIGHT_SUM_TOL:
            raise ValidationError(
                f"The zero-order moment is the normalization and must be 1, "
                f"got {entries[zero]}."
            )

        ordered = dict(sorted(entries.items(), key=lambda item: item[0].sort_key()))
        object.__setattr__(self, "entries", ordered)

    @classmethod
    def from_values(
        cls,
        dim: int,
        values: Mapping[MultiIndex | Sequence[int], float],
        order: int | None = None,
    ) -> "MomentTable":
        entries = {as_multi_index(k): v for k, v in values.items()}
        if order is None:
            order = max((k.order for k in entries), default=0)
        return cls(dim=dim, order=order, entries=entries)

    @classmethod
    def scalar(
        cls, values: Sequence[float], include_zero: bool = True
    ) -> "MomentTable":
        """Builds a 1-D table from the list e_0, e_1, ..., e_M."""
        start = 0 if include_zero else 1
        entries = {MultiIndex.of(i): values[i] for i in range(start, len(values))}
        return cls(dim=1, order=len(values) - 1, entries=entries)

    @property
    def indices(self) -> list[MultiIndex]:
        return list(self.entries)

    @property
    def constraint_indices(self) -> list[MultiIndex]:
        """Specified indices other than the zero index, which every mixture meets."""
        return [kappa for kappa in self.entries if not kappa.is_zero]

    def values(self, indices: Iterable[MultiIndex] | None = None) -> np.ndarray:
        if indices is None:
            indices = self.indices
        return np.array([self.entries[kappa] for kappa in indices], dtype=float)

    def shifted_mean(self, shift: Sequence[float]) -> "MomentTable":
        """Adds `shift` to every specified first-order moment."""
        shift = np.asarray(shift, dtype=float)
        entries = dict(self.entries)
        for kappa in entries:
            if kappa.order == 1:
                entries[kappa] += float(shift[kappa.exponents.index(1)])
        return MomentTable(dim=self.dim, order=self.order, entries=entries)

    def __getitem__(self, key: MultiIndex | Sequence[int]) -> float:
        return self.entries[as_multi_index(key)]

    def __contains__(self, key: object) -> bool:
        if isinstance(key, (MultiIndex, tuple, list)):
            return as_multi_index(key) in self.entries
        return False

    def __len__(self) -> int:
        return len(self.entries)


@dataclass(frozen=True, eq=False)
class DiracMixture:
    """
    L point masses in R^N with positive weights summing to one.

    `check_distinct=False` admits coincident locations; solvers use it to report
    a degenerate, non-converged iterate.
    """

    locations: np.ndarray
    weights: np.ndarray
    check_distinct: InitVar[bool] = True

    def __post_init__(self, check_distinct: bool) -> None:
        locations = np.asarray(self.locations, dtype=float)
        if locations.ndim == 1:
            locations = locations[:, None]
        weights = np.asarray(self.weights, dtype=float).reshape(-1)

        if locations.ndim != 2 or locations.size == 0:
            raise ValidationError(
                "Dirac locations must form a non-empty (L, N) matrix."
            )
        if len(weights) != len(locations):
            raise ValidationError(
                f"Got {len(weights)} weights for {len(locations)} locations."
            )
        Finite().validate(locations, "DiracMixture", "locations")
        Positive().validate(weights, "DiracMixture", "weights")
        if abs(weights.sum() - 1.0) > WEIGHT_SUM_TOL:
            raise ValidationError(
                f"Dirac weights must sum to 1, got {weights.sum():.17g}."
            )
        if check_distinct:
            DistinctRows().validate(locations, "DiracMixture", "locations")

        locations.setflags(write=False)
        weights.setflags(write=False)
        object.__setattr__(self, "locations", locations)
        object.__setattr__(self, "weights", weights)

    @classmethod
    def equally_weighted(cls, locations: np.ndarray) -> "DiracMixture":
        locations = np.asarray(locations, dtype=float)
        count = len(locations)
        return cls(locations=locations, weights=np.full(count, 1.0 / count))

    @property
    def size(self) -> int:
        return self.locations.shape[0]

    @property
    def dim(self) -> int:
        return self.locations.shape[1]

    @property
    def parameters(self) -> np.ndarray:
        """The flattened location vector, component after component."""
        return self.locations.reshape(-1).copy()

    def mean(self) -> np.ndarray:
        return self.weights @ self.locations


@dataclass(frozen=True)
class ScalarGaussian:
    mean: float
    std: float

    def __post_init__(self) -> None:
        if not self.std > 0:
            raise ValidationError(
                f"Gaussian standard deviation must be > 0, got {self.std}."
            )


@dataclass(frozen=True)
class ScalarGaussianMixture:
    """Weighted sum of scalar Gaussians; weights are non-negative and sum to one."""

    components: tuple[tuple[float, ScalarGaussian], ...]

    def __post_init__(self) -> None:
        components = tuple((float(w), g) for w, g in self.components)
        if not components:
            raise ValidationError("A Gaussian mixture needs at least one component.")
        weights = np.array([w for w, _ in components])
        NonNegative().validate(weights, "ScalarGaussianMixture", "weights")
        if abs(weights.sum() - 1.0) > WEIGHT_SUM_TOL:
            raise ValidationError(
                f"Gaussian mixture weights must sum to 1, got {weights.sum():.17g}."
            )
        object.__setattr__(self, "components", components)

    @property
    def weights(self) -> np.ndarray:
        return np.array([w for w, _ in self.components])


# --- Dirac mixture moments ---


def moment_terms(
    locations: np.ndarray, weights: np.ndarray, exponents: np.ndarray
) -> np.ndarray:
    """
    Weighted monomials w_i * x_i^kappa as a (P, L) matrix, one row per index.
    """
    powers = locations[None, :, :] ** exponents[:, None, :]
    return weights[None, :] * np.prod(powers, axis=2)


def moment_jacobian(
    locations: np.ndarray, weights: np.ndarray, exponents: np.ndarray
) -> np.ndarray:
    """
    Derivatives of the moments with respect to the locations as a (P, L, N) array.

    Exponents equal to zero give exact zeros; 0 ** -1 is never evaluated.
    """
    powers = locations[None, :, :] ** exponents[:, None, :]
    lowered = locations[None, :, :] ** np.maximum(exponents - 1, 0)[:, None, :]
    derivative = exponents[:, None, :] * lowered

    jacobian = np.empty_like(powers)
    for k in range(locations.shape[1]):
        others = np.prod(np.delete(powers, k, axis=2), axis=2)
        jacobian[:, :, k] = derivative[:, :, k] * others
    return jacobian * weights[None, :, None]


@enforce
def dirac_moments(dm: DiracMixture, M: Annotated[int, NonNegative()]) -> MomentTable:
    """All power moments of `dm` up to order M."""
    indices = enumerate_indices(dm.dim, M)
    terms = moment_terms(dm.locations, dm.weights, exponent_matrix(indices))
    values = terms.sum(axis=1)
    values[0] = 1.0
    return MomentTable(dim=dm.dim, order=M, entries=dict(zip(indices, values)))


def dirac_moment_values(dm: DiracMixture, indices: Sequence[MultiIndex]) -> np.ndarray:
    """Moments of `dm` for the given indices, in the given order."""
    if not indices:
        return np.zeros(0)
    return moment_terms(dm.locations, dm.weights, exponent_matrix(indices)).sum(axis=1)


def dirac_moment_gradient(
    dm: DiracMixture, kappa: MultiIndex | Sequence[int]
) -> np.ndarray:
    """Gradient of e_kappa with respect to the locations, as an (N, L) matrix."""
    kappa = as_multi_index(kappa)
    if kappa.dim != dm.dim:
        raise ValidationError(
            f"Index {kappa.exponents} does not match mixture dimension {dm.dim}."
        )
    jacobian = moment_jacobian(dm.locations, dm.weights, exponent_matrix([kappa]))
    return jacobian[0].T


# --- Gaussian moments ---


@enforce
def gaussian_central_moment(
    i: Annotated[int, NonNegative()], sigma: Annotated[float, Positive()]
) -> float:
    """(i-1)!! sigma^i for even i, zero for odd i."""
    if i == 0:
        return 1.0
    if i % 2:
        return 0.0
    return float(factorial2(i - 1, exact=True)) * sigma**i


@enforce
def gaussian_raw_moment(i: Annotated[int, NonNegative()], g: ScalarGaussian) -> float:
    return math.fsum(
        math.comb(i, k) * gaussian_central_moment(i - k, g.std) * g.mean**k
        for k in range(i + 1)
    )


@enforce
def mixture_raw_moments(
    gm: ScalarGaussianMixture, M: Annotated[int, NonNegative()]
) -> list[float]:
    """E_0 .. E_M of a scalar Gaussian mixture; E_0 is exactly 1."""
    raw = [
        math.fsum(w * gaussian_raw_moment(i, g) for w, g in gm.components)
        for i in range(M + 1)
    ]
    raw[0] = 1.0
    return raw


@enforce
def mixture_central_moments(raw: Annotated[Sequence[float], NotEmpty()]) -> list[float]:
    """Central moments C_0 .. C_M from raw moments E_0 .. E_M (with E_0 = 1)."""
    if raw[0] != 1.0:
        raise ValidationError(
            f"Parameter 'raw' must start with E_0 = 1 for function "
            f"'mixture_central_moments', got {raw[0]}."
        )
    mean = raw[1] if len(raw) > 1 else 0.0
    central = [
        math.fsum(math.comb(i, j) * raw[i - j] * (-mean) ** j for j in range(i + 1))
        for i in range(len(raw))
    ]
    central[0] = 1.0
    if len(central) > 1:
        central[1] = 0.0
    return central


def gaussian_table(g: ScalarGaussian, M: int, include_zero: bool = True) -> MomentTable:
    values = [gaussian_raw_moment(i, g) for i in range(M + 1)]
    return MomentTable.scalar(values, include_zero)


def mixture_table(
    gm: ScalarGaussianMixture, M: int, include_zero: bool = True
) -> MomentTable:
    return MomentTable.scalar(mixture_raw_moments(gm, M), include_zero)


# --- Residuals ---


def order_weights(
    target: MomentTable, per_order: Mapping[int, float]
) -> dict[MultiIndex, float]:
    """Expands per-order weights into per-index weights; missing orders weigh 1."""
    return {kappa: float(per_order.get(kappa.order, 1.0)) for kappa in target.indices}


def residual_weights(target: MomentTable, weighting: Weighting = None) -> np.ndarray:
    indices = target.indices
    if weighting is None or weighting == "uniform":
        return np.ones(len(indices))
    if weighting == "relative":
        return 1.0 / np.maximum(1.0, np.abs(target.values()))
    if isinstance(weighting, str):
        raise ValidationError(f"Unknown residual weighting '{weighting}'.")
    weights = np.array([float(weighting.get(kappa, 1.0)) for kappa in indices])
    NonNegative().validate(weights, "residual_weights", "weighting")
    return weights


@enforce
def residual(
    actual: MomentTable, target: MomentTable, weighting: Weighting = None
) -> tuple[np.ndarray, float]:
    """
    Weighted residuals actual - target over the target indices that `actual`
    also specifies, in canonical order, together with their Euclidean
    (Frobenius) norm. Indices missing from `actual` are skipped.
    """
    if actual.dim != target.dim:
        raise ValidationError(
            f"Cannot compare moment tables of dimension {actual.dim} and {target.dim}."
        )
    shared = np.array([kappa in actual.entries for kappa in target.indices], bool)
    if not shared.all():
        logger.debug(
            "Residual skips %d target indices the actual table lacks",
            int((~shared).sum()),
        )
    indices = [kappa for kappa, keep in zip(target.indices, shared) if keep]
    weights = residual_weights(target, weighting)[shared]
    diff = weights * (actual.values(indices) - target.values(indices))
    return diff, float(np.linalg.norm(diff))

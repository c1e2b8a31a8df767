"""
Evaluation of Dirac mixture approximations against the densities that generated
their target moments.

Reference densities live here only; the solvers in `dma` never see them.
"""

import logging
from collections.abc import Callable
from dataclasses import dataclass, field
from typing import Annotated, Any

import numpy as np
from scipy.stats import norm

from .decorators import enforce
from .exceptions import UnknownPresetError, ValidationError
from .momentlib import (
    DiracMixture,
    MomentTable,
    ScalarGaussian,
    ScalarGaussianMixture,
    dirac_moments,
    gaussian_table,
    mixture_table,
    residual,
)
from .pwcdensity import check_feasible, entropy_of
from .solver import SolverOptions
from .validators import Positive

logger = logging.getLogger(__name__)

type Cdf = Callable[[np.ndarray], np.ndarray]
type Reference = ScalarGaussian | ScalarGaussianMixture

GAUSSIAN_MIXTURE = ScalarGaussianMixture(
    ((0.4, ScalarGaussian(-1.5, 0.7)), (0.6, ScalarGaussian(1.5, 0.7)))
)
STANDARD_NORMAL = ScalarGaussian(0.0, 1.0)


def _require_scalar(dm: DiracMixture, func_name: str) -> None:
    if dm.dim != 1:
        raise ValidationError(
            f"Parameter 'dm' must be one-dimensional for function '{func_name}', "
            f"got dimension {dm.dim}."
        )


# --- Distribution functions ---


def ecdf_1d(dm: DiracMixture) -> list[tuple[float, float]]:
    """Steps of the cumulative distribution as sorted (location, cumulative weight)."""
    _require_scalar(dm, "ecdf_1d")
    order = np.argsort(dm.locations[:, 0], kind="stable")
    locations = dm.locations[order, 0]
    cumulative = np.cumsum(dm.weights[order])
    return [(float(x), float(c)) for x, c in zip(locations, cumulative)]


@enforce
def reference_cdf_gaussian(m: float, sigma: Annotated[float, Positive()]) -> Cdf:
    distribution = norm(loc=m, scale=sigma)
    return lambda x: distribution.cdf(x)


def reference_cdf_gm(gm: ScalarGaussianMixture) -> Cdf:
    parts = [(w, norm(loc=g.mean, scale=g.std)) for w, g in gm.components]

    def cdf(x: np.ndarray) -> np.ndarray:
        return sum(w * d.cdf(x) for w, d in parts)

    return cdf


def reference_cdf(reference: Reference) -> Cdf:
    if isinstance(reference, ScalarGaussian):
        return reference_cdf_gaussian(reference.mean, reference.std)
    return reference_cdf_gm(reference)


def cvm_distance_1d(dm: DiracMixture, cdf: Cdf) -> float:
    """
    Cramér-von Mises type distance, the integral of (F_dm - F_ref)^2 dF_ref.

    Between two steps F_dm is a constant c, and substituting u = F_ref(x) turns
    the piece into the integral of (u - c)^2 over [F_ref(a), F_ref(b)], so the
    integral is evaluated exactly rather than by quadrature.
    """
    steps = ecdf_1d(dm)
    edges = np.array([x for x, _ in steps])
    levels = np.concatenate([[0.0], [c for _, c in steps]])
    levels[-1] = 1.0
    u = np.concatenate([[0.0], np.asarray(cdf(edges), dtype=float), [1.0]])

    upper = (u[1:] - levels) ** 3
    lower = (u[:-1] - levels) ** 3
    return float(max(0.0, np.sum(upper - lower) / 3.0))


def plot_grid(dm: DiracMixture, cdf: Cdf, points: int = 1000) -> np.ndarray:
    """Reference CDF sampled on [min location - 3, max location + 3] as (x, F)."""
    _require_scalar(dm, "plot_grid")
    grid = np.linspace(dm.locations.min() - 3.0, dm.locations.max() + 3.0, points)
    return np.column_stack([grid, cdf(grid)])


# --- Experiment presets ---


@dataclass(frozen=True)
class ExperimentPreset:
    """
    A reproducible experiment: target moments generated from `reference` (when
    one exists) and the component counts it is run with.
    """

    name: str
    description: str
    target: MomentTable
    L_values: tuple[int, ...]
    reference: Reference | None = None
    symmetric: bool = False
    prescribed_mean: tuple[float, ...] | None = None
    solver: dict[str, Any] = field(default_factory=dict)

    @property
    def default_L(self) -> int:
        return self.L_values[0]

    def problem(self, L: int | None = None, opts: SolverOptions | None = None):
        from .dma import DmaProblem

        L = self.default_L if L is None else L
        return DmaProblem(
            dim=self.target.dim,
            L=L,
            target=self.target,
            symmetric=self.symmetric,
            prescribed_mean=(
                np.asarray(self.prescribed_mean) if self.prescribed_mean else None
            ),
            opts=opts or SolverOptions.from_mapping(self.solver),
        )


def _presets() -> dict[str, ExperimentPreset]:
    return {
        "gauss1d": ExperimentPreset(
            name="gauss1d",
            description="standard normal, moments e1, e2",
            target=gaussian_table(STANDARD_NORMAL, 2, include_zero=False),
            L_values=(6, 10, 15),
            reference=STANDARD_NORMAL,
        ),
        "gm1d_m4": ExperimentPreset(
            name="gm1d_m4",
            description="two-component Gaussian mixture, moments e0 .. e4",
            target=mixture_table(GAUSSIAN_MIXTURE, 4),
            L_values=(10,),
            reference=GAUSSIAN_MIXTURE,
        ),
        "gm1d_m6": ExperimentPreset(
            name="gm1d_m6",
            description="two-component Gaussian mixture, moments e0 .. e6",
            target=mixture_table(GAUSSIAN_MIXTURE, 6),
            L_values=(15, 25),
            reference=GAUSSIAN_MIXTURE,
        ),
        "gauss2d_sym": ExperimentPreset(
            name="gauss2d_sym",
            description="axis-aligned 2-D moments up to order 2, symmetric",
            target=MomentTable.from_values(
                2,
                {
                    (0, 0): 1.0,
                    (0, 1): 0.0,
                    (1, 0): 0.0,
                    (1, 1): 0.0,
                    (0, 2): 3.0,
                    (2, 0): 1.0,
                },
            ),
            L_values=(16, 20, 30, 40),
            symmetric=True,
            prescribed_mean=(0.0, 0.0),
        ),
    }


PRESET_NAMES = tuple(_presets())


def preset(name: str) -> ExperimentPreset:
    presets = _presets()
    if name not in presets:
        raise UnknownPresetError(
            f"Unknown preset '{name}'; choose one of {', '.join(presets)}."
        )
    return presets[name]


# --- Solution evaluation ---


def evaluate_solution(
    mixture: DiracMixture,
    diameters: np.ndarray | None,
    target: MomentTable,
    eps_slack: float,
    reference: Reference | None = None,
) -> dict[str, Any]:
    """Residual norm, entropy, feasibility verdict and (1-D only) CvM distance."""
    actual = dirac_moments(mixture, target.order)
    _, norm_ = residual(actual, target)
    result: dict[str, Any] = {
        "L": mixture.size,
        "dim": mixture.dim,
        "moment_residual_norm": norm_,
        "entropy": None,
        "feasibility": None,
        "cvm": None,
    }
    if diameters is not None:
        result["entropy"] = entropy_of(mixture.weights, np.log(diameters), mixture.dim)
        result["feasibility"] = check_feasible(
            mixture.locations, diameters, eps_slack
        ).to_dict()
    if reference is not None:
        _require_scalar(mixture, "evaluate_solution")
        result["cvm"] = cvm_distance_1d(mixture, reference_cdf(reference))
    return result

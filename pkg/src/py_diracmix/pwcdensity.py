"""
Piecewise constant densities over disjoint spheres.

Each Dirac component i is smeared into a uniform density on the sphere of
radius d_i around its location, carrying the component's weight. Its Shannon
entropy (in nats) regularizes the choice among Dirac mixtures with equal
moments. Disjointness is enforced with a multiplicative slack:

    d_i + d_j <= (1 - eps_slack) * |x_i - x_j|    for all i < j
"""

import logging
import math
from dataclasses import dataclass
from typing import Annotated

import numpy as np
from scipy.spatial.distance import cdist, pdist
from scipy.special import gammaln

from .decorators import enforce
from .exceptions import DegenerateInputError, UnboundedProblemError, ValidationError
from .momentlib import DiracMixture
from .solver import SolverOptions, SolverTrace, maximize_constrained
from .validators import Finite, Positive

logger = logging.getLogger(__name__)


@dataclass(frozen=True, eq=False)
class PwcDensity:
    mixture: DiracMixture
    diameters: np.ndarray

    def __post_init__(self) -> None:
        diameters = np.asarray(self.diameters, dtype=float).reshape(-1)
        if diameters.size != self.mixture.size:
            raise ValidationError(
                f"Got {diameters.size} diameters for {self.mixture.size} components."
            )
        Positive().validate(diameters, "PwcDensity", "diameters")
        diameters.setflags(write=False)
        object.__setattr__(self, "diameters", diameters)

    @property
    def dim(self) -> int:
        return self.mixture.dim

    @property
    def size(self) -> int:
        return self.mixture.size


@dataclass(frozen=True)
class FeasibilityReport:
    """Verdict of the disjointness check; indices are 0-based, pairs have i < j."""

    feasible: bool
    nonpositive: list[int]
    overlapping: list[tuple[int, int]]

    def to_dict(self) -> dict:
        return {
            "feasible": self.feasible,
            "nonpositive": list(self.nonpositive),
            "overlapping": [list(pair) for pair in self.overlapping],
        }


def log_unit_volume(N: int) -> float:
    """log of the volume of the N-dimensional unit ball."""
    return 0.5 * N * math.log(math.pi) - float(gammaln(0.5 * N + 1.0))


@enforce
def sphere_volume(
    N: Annotated[int, Positive()], d: Annotated[float, Positive()]
) -> float:
    """Volume of the N-dimensional ball of radius d."""
    return math.exp(log_unit_volume(N)) * d**N


def heights(p: PwcDensity) -> np.ndarray:
    """Constant density value of each component: w_i / V_N(d_i)."""
    volumes = math.exp(log_unit_volume(p.dim)) * p.diameters**p.dim
    return p.mixture.weights / volumes


def entropy_of(weights: np.ndarray, log_diameters: np.ndarray, N: int) -> float:
    """Entropy from weights and log-diameters; the form the optimizers use."""
    return log_unit_volume(N) - float(weights @ np.log(weights)) + N * float(
        weights @ log_diameters
    )


def entropy(p: PwcDensity) -> float:
    """Shannon entropy in nats, c_N - sum_i w_i log(w_i / d_i^N)."""
    return entropy_of(p.mixture.weights, np.log(p.diameters), p.dim)


def entropy_gradient_d(p: PwcDensity) -> np.ndarray:
    """Partial derivatives of the entropy with respect to the diameters, N w_i / d_i."""
    return p.dim * p.mixture.weights / p.diameters


def constraint_pairs(locations: np.ndarray) -> np.ndarray:
    """
    Index pairs (i, j) whose spheres must not collide, as a (P, 2) array.

    In one dimension only neighbours in sorted order can collide, giving L - 1
    pairs; otherwise every pair i < j is listed.
    """
    locations = np.asarray(locations, dtype=float)
    if locations.ndim == 1:
        locations = locations[:, None]
    count = len(locations)
    if locations.shape[1] == 1:
        order = np.argsort(locations[:, 0], kind="stable")
        return np.stack([order[:-1], order[1:]], axis=1).reshape(-1, 2)
    rows, cols = np.triu_indices(count, k=1)
    return np.stack([rows, cols], axis=1)


@enforce
def check_feasible(
    locations: Annotated[np.ndarray, Finite()],
    diameters: Annotated[np.ndarray, Finite()],
    eps_slack: float = 0.0,
    reduced: bool = False,
) -> FeasibilityReport:
    """
    Reports every non-positive diameter and every colliding pair (i < j).

    With `reduced`, only the pairs from `constraint_pairs` are checked, i.e. the
    sorted neighbours in one dimension.
    """
    locations = np.asarray(locations, dtype=float)
    if locations.ndim == 1:
        locations = locations[:, None]
    diameters = np.asarray(diameters, dtype=float).reshape(-1)

    nonpositive = [int(i) for i in np.flatnonzero(diameters <= 0)]
    distances = cdist(locations, locations)
    sums = diameters[:, None] + diameters[None, :]
    if reduced:
        rows, cols = np.sort(constraint_pairs(locations), axis=1).T
    else:
        rows, cols = np.triu_indices(len(diameters), k=1)
    colliding = sums[rows, cols] > (1.0 - eps_slack) * distances[rows, cols]
    overlapping = [(int(i), int(j)) for i, j in zip(rows[colliding], cols[colliding])]

    return FeasibilityReport(
        feasible=not nonpositive and not overlapping,
        nonpositive=nonpositive,
        overlapping=overlapping,
    )


def initial_diameters(locations: np.ndarray, eps_slack: float) -> np.ndarray:
    """Half the nearest-neighbour distance, shrunk by the slack; always feasible."""
    locations = np.asarray(locations, dtype=float)
    if locations.ndim == 1:
        locations = locations[:, None]
    if len(locations) < 2:
        return np.ones(len(locations))
    distances = cdist(locations, locations)
    np.fill_diagonal(distances, np.inf)
    return (1.0 - eps_slack) * 0.5 * distances.min(axis=1)


def shrink_to_feasible(
    locations: np.ndarray, diameters: np.ndarray, eps_slack: float
) -> np.ndarray:
    """
    Scales down the diameters of colliding pairs proportionally so that every
    pair satisfies d_i + d_j <= (1 - eps_slack) |x_i - x_j|. Feasible input is
    returned unchanged.
    """
    locations = np.asarray(locations, dtype=float)
    if locations.ndim == 1:
        locations = locations[:, None]
    diameters = np.asarray(diameters, dtype=float).copy()
    if len(diameters) < 2:
        return diameters

    allowed = (1.0 - eps_slack) * cdist(locations, locations)
    sums = diameters[:, None] + diameters[None, :]
    np.fill_diagonal(sums, 1.0)
    np.fill_diagonal(allowed, np.inf)
    # d_i r_i + d_j r_j <= max(r_i, r_j) (d_i + d_j) <= allowed_ij; the factor
    # absorbs rounding in the products.
    ratio = np.min(allowed / sums, axis=1) * (1.0 - 1e-12)
    return np.where(ratio < 1.0, diameters * ratio, diameters)


@enforce
def max_entropy_diameters(dm: DiracMixture, opts: SolverOptions) -> np.ndarray:
    """Maximum entropy diameters for the fixed locations of `dm`."""
    diameters, _ = solve_diameters(dm, opts)
    return diameters


def solve_diameters(
    dm: DiracMixture, opts: SolverOptions
) -> tuple[np.ndarray, SolverTrace]:
    """
    Diameters of the maximum entropy piecewise constant density for fixed
    locations, optimized in log-parametrization under the slack-disjointness
    constraints (and the optional cap d_max).
    """
    locations = dm.locations
    if dm.size > 1 and np.min(pdist(locations)) == 0.0:
        raise DegenerateInputError(
            "Parameter 'dm' must contain pairwise distinct locations for function "
            "'max_entropy_diameters'."
        )
    if dm.size == 1 and opts.d_max is None:
        raise UnboundedProblemError(
            "Entropy is unbounded for a single component; "
            "set d_max to cap the diameter."
        )

    N = dm.dim
    weights = dm.weights
    pairs = constraint_pairs(locations)
    allowed = (1.0 - opts.eps_slack) * np.linalg.norm(
        locations[pairs[:, 0]] - locations[pairs[:, 1]], axis=1
    )
    log_cap = math.log(opts.d_max) if opts.d_max is not None else None

    def objective(s: np.ndarray) -> tuple[float, np.ndarray]:
        return entropy_of(weights, s, N), N * weights

    def inequality(s: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        d = np.exp(s)
        values = (d[pairs[:, 0]] + d[pairs[:, 1]]) / allowed - 1.0
        jacobian = np.zeros((len(pairs), s.size))
        rows = np.arange(len(pairs))
        jacobian[rows, pairs[:, 0]] = d[pairs[:, 0]] / allowed
        jacobian[rows, pairs[:, 1]] = d[pairs[:, 1]] / allowed
        if log_cap is not None:
            values = np.concatenate([values, s - log_cap])
            jacobian = np.vstack([jacobian, np.eye(s.size)])
        return values, jacobian

    start = initial_diameters(locations, opts.eps_slack)
    if opts.d_max is not None:
        start = np.minimum(start, opts.d_max)
    s, trace = maximize_constrained(
        objective, np.log(start), opts, inequality=inequality
    )

    diameters = np.exp(s)
    if opts.d_max is not None:
        diameters = np.minimum(diameters, opts.d_max)
    diameters = shrink_to_feasible(locations, diameters, opts.eps_slack)
    trace.objective = entropy_of(weights, np.log(diameters), N)
    return diameters, trace


def evaluate(p: PwcDensity, x: np.ndarray | float) -> float:
    """Density value at the point x: the height of the sphere containing x, else 0."""
    point = np.atleast_1d(np.asarray(x, dtype=float))
    if point.shape != (p.dim,):
        raise ValidationError(
            f"Point of shape {point.shape} does not match density dimension {p.dim}."
        )
    return float(evaluate_many(p, point[None, :])[0])


def evaluate_many(p: PwcDensity, points: np.ndarray) -> np.ndarray:
    """Vectorized `evaluate` over a (K, N) batch; a 1-D batch is read as N = 1."""
    points = np.asarray(points, dtype=float)
    if points.ndim == 1:
        points = points[:, None]
    distances = cdist(points, p.mixture.locations)
    # Spheres are disjoint, so at most one column per row is inside.
    inside = distances <= p.diameters[None, :]
    return inside.astype(float) @ heights(p)

"""
Dirac mixture approximation with prescribed moments.

Assembles the moment-matching problems for the three determinedness cases:

- underdetermined (more location parameters than moments): the locations and
  the sphere diameters are optimized jointly, maximizing the entropy of the
  piecewise constant companion density under the moment equalities and the
  disjointness inequalities (`solve_max_entropy`);
- fully determined: the moment equations are root-solved
  (`solve_fully_determined`);
- overdetermined: the (weighted) moment residual is minimized in the least
  squares sense (`solve_overdetermined`).

`solve_lm_baseline` root-solves the moment equations without regularization,
whatever the case. In symmetric mode only the master components are free; the
slaves are their reflections through the prescribed mean.
"""

import enum
import logging
import math
from dataclasses import dataclass, field
from typing import Annotated, Any, Literal

import numpy as np
from scipy.spatial.distance import pdist

from .decorators import enforce
from .exceptions import DegenerateInputError, UnboundedProblemError, ValidationError
from .momentlib import (
    DiracMixture,
    MomentTable,
    Weighting,
    moment_jacobian,
    moment_terms,
    residual_weights,
)
from .multiindex import MultiIndex, exponent_matrix
from .pwcdensity import (
    entropy_of,
    initial_diameters,
    shrink_to_feasible,
    solve_diameters,
)
from .solver import SolverOptions, SolverTrace, lm_root, maximize_constrained
from .validators import Finite, NonNegative

logger = logging.getLogger(__name__)

MAX_INIT_ATTEMPTS = 100
COINCIDENCE_TOL = 1e-9


class Case(enum.StrEnum):
    OVERDETERMINED = "overdetermined"
    FULLY_DETERMINED = "fully-determined"
    UNDERDETERMINED = "underdetermined"


@dataclass(frozen=True, eq=False)
class DmaProblem:
    """
    Moment-matching problem: find L locations in R^dim whose (fixed-weight)
    Dirac mixture reproduces `target`.
    """

    dim: int
    L: int
    target: MomentTable
    symmetric: bool = False
    prescribed_mean: np.ndarray | None = None
    weights: np.ndarray | None = None
    opts: SolverOptions = field(default_factory=SolverOptions)
    weighting: Weighting = None

    def __post_init__(self) -> None:
        if self.dim < 1 or self.L < 1:
            raise ValidationError(
                f"Problem needs dim >= 1 and L >= 1, got dim={self.dim}, L={self.L}."
            )
        if self.target.dim != self.dim:
            raise ValidationError(
                f"Target table of dimension {self.target.dim} does not match "
                f"problem dimension {self.dim}."
            )

        if self.weights is None:
            weights = np.full(self.L, 1.0 / self.L)
        else:
            weights = np.asarray(self.weights, dtype=float).reshape(-1)
            # Reuses the mixture checks: positive, normalized, one per component.
            DiracMixture(np.zeros((len(weights), 1)), weights, check_distinct=False)
            if len(weights) != self.L:
                raise ValidationError(f"Got {len(weights)} weights for L={self.L}.")
        object.__setattr__(self, "weights", weights)

        if self.symmetric:
            if self.L % 2:
                raise ValidationError(
                    f"Symmetric problems need an even L, got {self.L}."
                )
            if self.prescribed_mean is None:
                raise ValidationError("Symmetric problems need a prescribed mean.")
            half = self.L // 2
            if not np.array_equal(weights[:half], weights[half:]):
                raise ValidationError(
                    "Symmetric problems need slave weights equal to master weights."
                )
        if self.prescribed_mean is not None:
            mean = np.asarray(self.prescribed_mean, dtype=float).reshape(-1)
            if mean.size != self.dim:
                raise ValidationError(
                    f"Prescribed mean of length {mean.size} does not match "
                    f"dimension {self.dim}."
                )
            Finite().validate(mean, "DmaProblem", "prescribed_mean")
            object.__setattr__(self, "prescribed_mean", mean)

    @property
    def free_components(self) -> int:
        return self.L // 2 if self.symmetric else self.L

    def with_options(self, **overrides: Any) -> "DmaProblem":
        return DmaProblem(
            dim=self.dim,
            L=self.L,
            target=self.target,
            symmetric=self.symmetric,
            prescribed_mean=self.prescribed_mean,
            weights=self.weights,
            opts=self.opts.replace(**overrides),
            weighting=self.weighting,
        )


@dataclass(eq=False)
class SolutionReport:
    mixture: DiracMixture
    diameters: np.ndarray | None
    entropy: float | None
    moment_residual_norm: float
    residuals: list[tuple[MultiIndex, float]]
    case: Case
    trace: SolverTrace
    seed: int
    method: str

    @property
    def converged(self) -> bool:
        return self.trace.converged


# --- Parametrization ---


class Parametrization:
    """
    Maps free variables to the full mixture and pulls full gradients back.

    Free locations are the L (or, when symmetric, L/2 master) rows of an
    (n_free, N) matrix. Symmetric mixtures list masters first, then slaves
    x_{i+L/2} = 2 mean - x_i, and share diameters between the two halves.
    """

    def __init__(self, problem: DmaProblem) -> None:
        self.dim = problem.dim
        self.size = problem.L
        self.symmetric = problem.symmetric
        self.free = problem.free_components
        self.weights = problem.weights
        self.mean = problem.prescribed_mean

    def locations(self, free: np.ndarray) -> np.ndarray:
        masters = free.reshape(self.free, self.dim)
        if not self.symmetric:
            return masters
        return np.vstack([masters, 2.0 * self.mean - masters])

    def pull_locations(self, gradient: np.ndarray) -> np.ndarray:
        """(..., L, N) gradient w.r.t. full locations -> (..., n_free * N)."""
        if self.symmetric:
            gradient = gradient[..., : self.free, :] - gradient[..., self.free :, :]
        return gradient.reshape(*gradient.shape[:-2], self.free * self.dim)

    def expand_diameters(self, free: np.ndarray) -> np.ndarray:
        return np.concatenate([free, free]) if self.symmetric else free

    def pull_diameters(self, gradient: np.ndarray) -> np.ndarray:
        if self.symmetric:
            return gradient[..., : self.free] + gradient[..., self.free :]
        return gradient

    def moments(self, locations: np.ndarray, exponents: np.ndarray) -> np.ndarray:
        """
        Moment values; symmetric mixtures add master and slave terms first so odd
        moments about a zero mean cancel exactly.
        """
        terms = moment_terms(locations, self.weights, exponents)
        if self.symmetric:
            terms = terms[:, : self.free] + terms[:, self.free :]
        return terms.sum(axis=1)

    def moment_jacobian(
        self, locations: np.ndarray, exponents: np.ndarray
    ) -> np.ndarray:
        return self.pull_locations(moment_jacobian(locations, self.weights, exponents))

    def mixture(self, free: np.ndarray, check_distinct: bool = True) -> DiracMixture:
        return DiracMixture(self.locations(free), self.weights, check_distinct)


# --- Operations ---


@enforce
def classify(problem: DmaProblem) -> Case:
    """Compares the L*N location parameters against the number of given moments."""
    parameters = problem.L * problem.dim
    moments = len(problem.target)
    if parameters < moments:
        return Case.OVERDETERMINED
    if parameters == moments:
        return Case.FULLY_DETERMINED
    return Case.UNDERDETERMINED


@enforce
def init_random(
    seed: Annotated[int, NonNegative()],
    L: int,
    N: int,
    symmetric: bool = False,
    prescribed_mean: np.ndarray | None = None,
) -> np.ndarray:
    """
    Standard normal start vector for the free locations, deterministic per seed.
    When symmetric only the L/2 masters are drawn, centred on the prescribed mean.
    """
    count = L // 2 if symmetric else L
    draw = np.random.default_rng(seed).standard_normal((count, N))
    if symmetric and prescribed_mean is not None:
        draw = draw + np.asarray(prescribed_mean, dtype=float).reshape(1, N)
    return draw.reshape(-1)


def _initial_locations(problem: DmaProblem, seed: int) -> np.ndarray:
    """
    Random start whose full mixture has no coincident components; colliding draws
    are repeated from streams derived from (seed, attempt).
    """
    params = Parametrization(problem)
    for attempt in range(MAX_INIT_ATTEMPTS):
        if attempt == 0:
            free = init_random(
                seed, problem.L, problem.dim, problem.symmetric, problem.prescribed_mean
            )
        else:
            draw = np.random.default_rng([seed, attempt]).standard_normal(
                (params.free, problem.dim)
            )
            if problem.symmetric:
                draw = draw + problem.prescribed_mean[None, :]
            free = draw.reshape(-1)
        locations = params.locations(free)
        if len(locations) < 2 or np.min(pdist(locations)) > COINCIDENCE_TOL:
            return free
        logger.warning("Initial locations collide for seed %d; drawing again", seed)
    raise DegenerateInputError(
        f"No collision-free initialization found in {MAX_INIT_ATTEMPTS} attempts."
    )


@enforce
def expand_symmetric(
    masters: Annotated[np.ndarray, Finite()],
    prescribed_mean: Annotated[np.ndarray, Finite()],
    weights: np.ndarray | None = None,
) -> DiracMixture:
    """
    Full symmetric mixture from master locations: masters first, then their
    reflections 2 mean - x_i. Master weights are copied to the slaves; by default
    all 2 * len(masters) components weigh the same.
    """
    masters = np.asarray(masters, dtype=float)
    mean = np.asarray(prescribed_mean, dtype=float).reshape(-1)
    if masters.ndim == 1:
        masters = masters.reshape(-1, mean.size)
    if np.any(np.all(masters == mean[None, :], axis=1)):
        raise DegenerateInputError(
            "Parameter 'masters' must not contain the prescribed mean, whose "
            "reflection coincides with itself, for function 'expand_symmetric'."
        )
    slaves = 2.0 * mean[None, :] - masters
    if weights is None:
        full_weights = np.full(2 * len(masters), 1.0 / (2 * len(masters)))
    else:
        half = np.asarray(weights, dtype=float).reshape(-1)
        full_weights = np.concatenate([half, half])
    return DiracMixture(np.vstack([masters, slaves]), full_weights)


def _moment_report(
    problem: DmaProblem, params: Parametrization, free: np.ndarray
) -> tuple[list[tuple[MultiIndex, float]], float]:
    indices = problem.target.indices
    actual = params.moments(params.locations(free), exponent_matrix(indices))
    diff = actual - problem.target.values()
    weights = residual_weights(problem.target, problem.weighting)
    norm = float(np.linalg.norm(diff * weights))
    return [(kappa, float(r)) for kappa, r in zip(indices, diff)], norm


def _report(
    problem: DmaProblem,
    free: np.ndarray,
    diameters: np.ndarray | None,
    trace: SolverTrace,
    seed: int,
    method: str,
) -> SolutionReport:
    params = Parametrization(problem)
    locations = params.locations(free)
    distinct = len(locations) < 2 or np.min(pdist(locations)) > 0.0
    mixture = params.mixture(free, check_distinct=distinct)
    residuals, norm = _moment_report(problem, params, free)

    if not distinct:
        logger.warning("Solution has coincident components; diameters left unset")
        diameters = None
    elif diameters is None:
        try:
            diameters, _ = solve_diameters(mixture, problem.opts)
        except UnboundedProblemError:
            logger.info("Single component without d_max: diameters left unset")
    entropy = None
    if diameters is not None:
        entropy = entropy_of(mixture.weights, np.log(diameters), problem.dim)

    return SolutionReport(
        mixture=mixture,
        diameters=diameters,
        entropy=entropy,
        moment_residual_norm=norm,
        residuals=residuals,
        case=classify(problem),
        trace=trace,
        seed=seed,
        method=method,
    )


def _rank(report: SolutionReport, tol: float) -> tuple:
    # Converged first, then residual (anything within tolerance ties), then
    # entropy, then seed.
    residual = report.moment_residual_norm if report.moment_residual_norm > tol else 0.0
    entropy = report.entropy if report.entropy is not None else -math.inf
    return (not report.converged, residual, -entropy, report.seed)


def _restart_seeds(opts: SolverOptions) -> list[int]:
    return [opts.seed + k for k in range(opts.restarts)]


def _suggest_larger_l(problem: DmaProblem, report: SolutionReport) -> None:
    if not report.converged and report.moment_residual_norm > problem.opts.tol_eq:
        logger.warning(
            "Moment residual stalled at %.3e with L=%d; the targets may be "
            "infeasible for this L, try a larger L",
            report.moment_residual_norm,
            problem.L,
        )


# --- Maximum entropy ---


class JointProgram:
    """
    Joint maximum entropy program over z = [free locations, free log-diameters].

    The moment equalities cover the constraint indices of the target. The
    disjointness inequalities are (d_i + d_j)^2 - (1 - eps)^2 |x_i - x_j|^2 <= 0
    over every pair i < j in a fixed order, followed by log d_i - log d_max <= 0
    when a cap is set.
    """

    def __init__(self, problem: DmaProblem) -> None:
        self.problem = problem
        self.params = Parametrization(problem)
        self.n_loc = self.params.free * problem.dim
        self.indices = problem.target.constraint_indices
        self.exponents = exponent_matrix(self.indices)
        self.targets = problem.target.values(self.indices)
        self.contraction = (1.0 - problem.opts.eps_slack) ** 2
        # Multipliers are indexed by row.
        self.pairs = np.stack(np.triu_indices(problem.L, k=1), axis=1)
        d_max = problem.opts.d_max
        self.log_cap = math.log(d_max) if d_max is not None else None

    def start(self, free0: np.ndarray) -> np.ndarray:
        opts = self.problem.opts
        start_d = initial_diameters(self.params.locations(free0), opts.eps_slack)
        if opts.d_max is not None:
            start_d = np.minimum(start_d, opts.d_max)
        return np.concatenate([free0, np.log(start_d[: self.params.free])])

    def split(self, z: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Free locations, all L locations and all L log-diameters."""
        locations = self.params.locations(z[: self.n_loc])
        return z[: self.n_loc], locations, self.params.expand_diameters(z[self.n_loc :])

    def objective(self, z: np.ndarray) -> tuple[float, np.ndarray]:
        _, _, s = self.split(z)
        weights = self.problem.weights
        N = self.problem.dim
        gradient = np.zeros_like(z)
        gradient[self.n_loc :] = self.params.pull_diameters(N * weights)
        return entropy_of(weights, s, N), gradient

    def equality(self, z: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        _, locations, _ = self.split(z)
        values = self.params.moments(locations, self.exponents) - self.targets
        jacobian = np.zeros((len(self.indices), z.size))
        jacobian[:, : self.n_loc] = self.params.moment_jacobian(
            locations, self.exponents
        )
        return values, jacobian

    def inequality(self, z: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        _, locations, s = self.split(z)
        L, N = self.problem.L, self.problem.dim
        d = np.exp(s)
        i, j = self.pairs[:, 0], self.pairs[:, 1]
        delta = locations[i] - locations[j]
        total = d[i] + d[j]
        values = total**2 - self.contraction * np.sum(delta**2, axis=1)

        rows = np.arange(len(self.pairs))
        loc_grad = np.zeros((len(self.pairs), L, N))
        loc_grad[rows, i] = -2.0 * self.contraction * delta
        loc_grad[rows, j] = 2.0 * self.contraction * delta
        s_grad = np.zeros((len(self.pairs), L))
        s_grad[rows, i] = 2.0 * total * d[i]
        s_grad[rows, j] = 2.0 * total * d[j]
        jacobian = np.hstack(
            [self.params.pull_locations(loc_grad), self.params.pull_diameters(s_grad)]
        )
        if self.log_cap is not None:
            cap_jac = np.zeros((self.params.free, z.size))
            cap_jac[:, self.n_loc :] = np.eye(self.params.free)
            values = np.concatenate([values, z[self.n_loc :] - self.log_cap])
            jacobian = np.vstack([jacobian, cap_jac])
        return values, jacobian


def _max_entropy_run(
    problem: DmaProblem, free0: np.ndarray, seed: int
) -> SolutionReport:
    program = JointProgram(problem)
    z, trace = maximize_constrained(
        program.objective,
        program.start(free0),
        problem.opts,
        equality=program.equality,
        inequality=program.inequality,
    )

    free, locations, s = program.split(z)
    diameters = np.exp(s)
    if problem.opts.d_max is not None:
        diameters = np.minimum(diameters, problem.opts.d_max)
    diameters = shrink_to_feasible(locations, diameters, problem.opts.eps_slack)
    return _report(problem, free, diameters, trace, seed, "maxent")


@enforce
def solve_max_entropy(
    problem: DmaProblem, initial: np.ndarray | None = None
) -> SolutionReport:
    """
    Jointly optimizes locations and diameters: maximum entropy of the piecewise
    constant density subject to the moment equalities and slack disjointness.

    Runs `opts.restarts` random starts (seeds seed, seed+1, ...) unless an
    `initial` free-location vector is given, and keeps the best run.
    """
    case = classify(problem)
    if case is not Case.UNDERDETERMINED:
        raise ValidationError(
            "Maximum entropy approximation needs an underdetermined problem, "
            f"got {case}."
        )
    if problem.L == 1 and problem.opts.d_max is None:
        raise UnboundedProblemError(
            "Entropy is unbounded for a single component; "
            "set d_max to cap the diameter."
        )

    if initial is not None:
        free0 = np.asarray(initial, dtype=float).reshape(-1)
        return _max_entropy_run(problem, free0, problem.opts.seed)

    reports = []
    for seed in _restart_seeds(problem.opts):
        logger.info("Maximum entropy restart with seed %d", seed)
        report = _max_entropy_run(problem, _initial_locations(problem, seed), seed)
        reports.append(report)
    best = min(reports, key=lambda r: _rank(r, problem.opts.tol_eq))
    _suggest_larger_l(problem, best)
    return best


# --- Levenberg-Marquardt based solves ---


def _moment_residual(problem: DmaProblem, use_weighting: bool):
    params = Parametrization(problem)
    indices = problem.target.constraint_indices
    exponents = exponent_matrix(indices)
    targets = problem.target.values(indices)
    scale = np.ones(len(indices))
    if use_weighting:
        all_weights = residual_weights(problem.target, problem.weighting)
        lookup = dict(zip(problem.target.indices, all_weights))
        scale = np.array([lookup[kappa] for kappa in indices])

    def residual(free: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        locations = params.locations(free)
        values = scale * (params.moments(locations, exponents) - targets)
        jacobian = scale[:, None] * params.moment_jacobian(locations, exponents)
        return values, jacobian

    return residual


def _lm_run(
    problem: DmaProblem,
    free0: np.ndarray,
    seed: int,
    method: str,
    mode: Literal["root", "least_squares"] = "root",
) -> SolutionReport:
    residual = _moment_residual(problem, use_weighting=mode == "least_squares")
    free, trace = lm_root(residual, free0, problem.opts, mode=mode)
    return _report(problem, free, None, trace, seed, method)


@enforce
def solve_lm_baseline(
    problem: DmaProblem, initial: np.ndarray | None = None
) -> SolutionReport:
    """
    Unregularized Levenberg-Marquardt root of the moment equations from a single
    random start (seed `opts.seed`); diameters are filled in afterwards by the
    maximum entropy diameters of the found locations.
    """
    seed = problem.opts.seed
    free0 = (
        np.asarray(initial, dtype=float).reshape(-1)
        if initial is not None
        else _initial_locations(problem, seed)
    )
    report = _lm_run(problem, free0, seed, "lm")
    _suggest_larger_l(problem, report)
    return report


@enforce
def solve_overdetermined(problem: DmaProblem) -> SolutionReport:
    """
    Least-squares fit of the (optionally weighted) moments; the best of
    `opts.restarts` stationary points is returned.
    """
    reports = [
        _lm_run(
            problem,
            _initial_locations(problem, seed),
            seed,
            "least-squares",
            mode="least_squares",
        )
        for seed in _restart_seeds(problem.opts)
    ]
    return min(
        reports,
        key=lambda r: (not r.converged, r.moment_residual_norm, r.seed),
    )


@enforce
def solve_fully_determined(problem: DmaProblem) -> SolutionReport:
    """
    Root of the square moment system: the first converged root in seed order, or
    the run with the smallest residual when none converges.
    """
    reports = []
    for seed in _restart_seeds(problem.opts):
        report = _lm_run(problem, _initial_locations(problem, seed), seed, "root")
        if report.converged:
            return report
        reports.append(report)
    best = min(reports, key=lambda r: (r.moment_residual_norm, r.seed))
    best.trace.message = (
        f"no root found in {len(reports)} restarts; {best.trace.message}"
    )
    _suggest_larger_l(problem, best)
    return best


type Method = Literal["auto", "maxent", "lm"]


def solve(problem: DmaProblem, method: Method = "auto") -> SolutionReport:
    """Dispatches on `method`; "auto" picks the solver matching the case."""
    if method == "maxent":
        return solve_max_entropy(problem)
    if method == "lm":
        return solve_lm_baseline(problem)
    if method != "auto":
        raise ValidationError(f"Unknown method '{method}'.")

    case = classify(problem)
    logger.info(
        "Problem is %s (L*N=%d, %d moments)",
        case,
        problem.L * problem.dim,
        len(problem.target),
    )
    if case is Case.UNDERDETERMINED:
        return solve_max_entropy(problem)
    if case is Case.FULLY_DETERMINED:
        return solve_fully_determined(problem)
    return solve_overdetermined(problem)


import math

import numpy as np
import pytest
from numpy.testing import assert_allclose
from scipy.optimize import linear_sum_assignment

from py_diracmix import (
    Case,
    DegenerateInputError,
    DmaProblem,
    MomentTable,
    MultiIndex,
    SolverOptions,
    UnboundedProblemError,
    ValidationError,
    classify,
    expand_symmetric,
    init_random,
    solve,
    solve_fully_determined,
    solve_lm_baseline,
    solve_max_entropy,
    solve_overdetermined,
)
from py_diracmix.dma import JointProgram
from py_diracmix.evalkit import preset
from py_diracmix.momentlib import dirac_moments
from py_diracmix.pwcdensity import check_feasible, max_entropy_diameters
from py_diracmix.solver import fd_gradient, fd_jacobian

STANDARD = MomentTable.from_values(1, {(1,): 0.0, (2,): 1.0})
SYMMETRIC_2D = MomentTable.from_values(
    2,
    {(0, 0): 1.0, (0, 1): 0.0, (1, 0): 0.0, (1, 1): 0.0, (0, 2): 3.0, (2, 0): 1.0},
)


def _gauss1d(seed=0):
    return preset("gauss1d").problem(6, SolverOptions(seed=seed))


def _matching_distance(a, b):
    """Largest displacement under the best one-to-one matching of two point sets."""
    cost = np.linalg.norm(a[:, None, :] - b[None, :, :], axis=2)
    rows, cols = linear_sum_assignment(cost)
    return float(cost[rows, cols].max())


# --- Problems and classification ---


def test_classify_cases():
    """Tests the comparison of L*N parameters against the moment count."""
    assert classify(DmaProblem(dim=1, L=6, target=STANDARD)) is Case.UNDERDETERMINED
    assert classify(DmaProblem(dim=1, L=2, target=STANDARD)) is Case.FULLY_DETERMINED
    assert classify(DmaProblem(dim=1, L=1, target=STANDARD)) is Case.OVERDETERMINED


def test_classify_counts_zero_index():
    """Tests that a listed zero-order moment counts as a given moment."""
    target = MomentTable.from_values(1, {(0,): 1.0, (1,): 0.0, (2,): 1.0})
    assert classify(DmaProblem(dim=1, L=2, target=target)) is Case.OVERDETERMINED


def test_problem_validation():
    """Tests the consistency checks of a problem."""
    with pytest.raises(ValidationError, match="does not match problem dimension"):
        DmaProblem(dim=2, L=4, target=STANDARD)

    with pytest.raises(ValidationError, match="even L"):
        DmaProblem(
            dim=2, L=5, target=SYMMETRIC_2D, symmetric=True, prescribed_mean=[0, 0]
        )

    with pytest.raises(ValidationError, match="prescribed mean"):
        DmaProblem(dim=2, L=4, target=SYMMETRIC_2D, symmetric=True)

    with pytest.raises(ValidationError, match="Got 2 weights for L=3"):
        DmaProblem(dim=1, L=3, target=STANDARD, weights=np.array([0.5, 0.5]))


# --- Initialization and symmetry ---


def test_init_random_is_deterministic():
    """Tests that equal seeds give equal starts and symmetric draws are halved."""
    first = init_random(3, 6, 2)
    assert first.shape == (12,)
    assert np.array_equal(first, init_random(3, 6, 2))
    assert not np.array_equal(first, init_random(4, 6, 2))

    masters = init_random(3, 6, 2, symmetric=True, prescribed_mean=np.array([1.0, 0.0]))
    assert masters.shape == (6,)


def test_init_random_rejects_negative_seed():
    """Tests the seed validation."""
    with pytest.raises(ValidationError, match="Parameter 'seed' must be non-negative"):
        init_random(-1, 4, 1)


def test_expand_symmetric():
    """Tests reflection through the mean and the resulting exact mean."""
    masters = np.array([[1.0, 0.5], [-0.3, 2.0]])
    mixture = expand_symmetric(masters, np.array([0.0, 0.0]))
    assert mixture.size == 4
    assert_allclose(mixture.locations[2:], -masters)
    assert np.all(mixture.locations[:2] + mixture.locations[2:] == 0.0)
    assert_allclose(mixture.weights, np.full(4, 0.25))

    shifted = expand_symmetric(masters, np.array([1.0, 1.0]))
    assert_allclose(shifted.mean(), [1.0, 1.0])


def test_expand_symmetric_rejects_master_on_mean():
    """Tests that a master on the mean would coincide with its slave."""
    masters = np.array([[0.0, 0.0], [1.0, 1.0]])
    with pytest.raises(DegenerateInputError, match="must not contain the prescribed"):
        expand_symmetric(masters, np.array([0.0, 0.0]))


# --- Fully and overdetermined ---


def test_fully_determined_root():
    """Tests that two components matching e1 = 0, e2 = 1 sit at -1 and 1."""
    report = solve_fully_determined(DmaProblem(dim=1, L=2, target=STANDARD))
    assert report.converged
    assert report.case is Case.FULLY_DETERMINED
    assert_allclose(np.sort(report.mixture.locations[:, 0]), [-1.0, 1.0], atol=1e-6)
    assert report.moment_residual_norm <= 1e-6


def test_overdetermined_single_component():
    """Tests the least-squares optimum of one component against a grid oracle."""
    report = solve_overdetermined(DmaProblem(dim=1, L=1, target=STANDARD))

    grid = np.linspace(-2.0, 2.0, 400_001)
    oracle = np.sqrt(grid**2 + (grid**2 - 1.0) ** 2).min()
    assert report.converged
    assert report.case is Case.OVERDETERMINED
    assert report.moment_residual_norm == pytest.approx(oracle, abs=1e-8)
    assert report.moment_residual_norm == pytest.approx(math.sqrt(3.0) / 2.0)
    assert abs(report.mixture.locations[0, 0]) == pytest.approx(
        1.0 / math.sqrt(2.0), rel=1e-4
    )


def test_overdetermined_weighting_changes_optimum():
    """Tests that weighting the second moment away leaves only e1 to fit."""
    weighting = {MultiIndex.of(2): 0.0}
    problem = DmaProblem(dim=1, L=1, target=STANDARD, weighting=weighting)
    report = solve_overdetermined(problem)
    assert abs(report.mixture.locations[0, 0]) <= 1e-6


def test_dispatch_by_case():
    """Tests that "auto" picks the solver matching the case."""
    assert solve(DmaProblem(dim=1, L=2, target=STANDARD)).method == "root"
    assert solve(DmaProblem(dim=1, L=1, target=STANDARD)).method == "least-squares"

    with pytest.raises(ValidationError, match="Unknown method"):
        solve(DmaProblem(dim=1, L=2, target=STANDARD), "newton")


# --- Maximum entropy ---


def test_max_entropy_needs_underdetermined_problem():
    """Tests that maximum entropy refuses problems without free parameters."""
    with pytest.raises(ValidationError, match="underdetermined"):
        solve_max_entropy(DmaProblem(dim=1, L=2, target=STANDARD))


def test_max_entropy_single_component_unbounded():
    """Tests that one component without a diameter cap is rejected."""
    target = MomentTable.from_values(2, {(1, 0): 0.0})
    with pytest.raises(UnboundedProblemError, match="d_max"):
        solve_max_entropy(DmaProblem(dim=2, L=1, target=target))


def test_max_entropy_gaussian():
    """Tests that six components reproduce the standard normal moments."""
    report = solve_max_entropy(_gauss1d())
    assert report.converged
    assert report.method == "maxent"
    assert report.case is Case.UNDERDETERMINED
    for _, value in report.residuals:
        assert abs(value) <= 1e-6
    assert check_feasible(report.mixture.locations, report.diameters, 1e-3).feasible
    assert report.entropy is not None


def _random_point(program, rng):
    free = rng.normal(size=program.n_loc)
    log_d = rng.uniform(-2.0, -0.5, size=program.params.free)
    return np.concatenate([free, log_d])


@pytest.mark.parametrize(
    "problem",
    [
        DmaProblem(dim=1, L=6, target=STANDARD),
        DmaProblem(dim=1, L=4, target=STANDARD, opts=SolverOptions(d_max=0.5)),
        DmaProblem(
            dim=2,
            L=6,
            target=SYMMETRIC_2D,
            symmetric=True,
            prescribed_mean=np.array([0.5, -1.0]),
        ),
    ],
    ids=["plain", "capped", "symmetric"],
)
def test_joint_constraint_jacobians_match_finite_differences(problem):
    """Tests the moment and disjointness Jacobians against central differences."""
    program = JointProgram(problem)
    rng = np.random.default_rng(4)
    for _ in range(5):
        z = _random_point(program, rng)
        for constraint in (program.equality, program.inequality):
            values, jacobian = constraint(z)
            assert jacobian.shape == (values.size, z.size)
            numeric = fd_jacobian(lambda v, c=constraint: c(v)[0], z)
            assert_allclose(jacobian, numeric, rtol=1e-5, atol=1e-6)


def test_joint_objective_gradient_matches_finite_differences():
    """Tests the entropy gradient with respect to the free log-diameters."""
    problem = DmaProblem(
        dim=2, L=6, target=SYMMETRIC_2D, symmetric=True, prescribed_mean=np.zeros(2)
    )
    program = JointProgram(problem)
    z = _random_point(program, np.random.default_rng(8))
    _, gradient = program.objective(z)
    numeric = fd_gradient(lambda v: program.objective(v)[0], z)
    assert_allclose(gradient, numeric, rtol=1e-6, atol=1e-8)


@pytest.mark.parametrize("shift", [0.3, -0.5])
def test_max_entropy_follows_a_shifted_mean(shift):
    """Tests that moving e1 and the start by b gives a solution for the new e1."""
    target = STANDARD.shifted_mean([shift])
    problem = DmaProblem(dim=1, L=6, target=target)
    start = init_random(2, 6, 1) + shift
    report = solve_max_entropy(problem, initial=start)

    assert report.converged
    moments = dirac_moments(report.mixture, 2)
    assert moments[(1,)] == pytest.approx(shift, abs=1e-6)
    assert moments[(2,)] == pytest.approx(1.0, abs=1e-6)


@pytest.mark.slow
def test_converged_max_entropy_is_stationary():
    """Tests that a converged run is stationary and cannot be improved from itself."""
    problem = preset("gm1d_m4").problem(10, SolverOptions())
    report = solve_max_entropy(problem)
    assert report.converged
    trace = report.trace
    assert trace.stationarity <= problem.opts.tol_obj * (1.0 + abs(trace.objective))

    again = solve_max_entropy(problem, initial=report.mixture.locations.reshape(-1))
    assert again.moment_residual_norm <= 1e-5
    assert again.entropy <= report.entropy + 1e-3


@pytest.mark.slow
def test_max_entropy_dominates_lm_baseline():
    """Tests that every maximum entropy run beats every LM run in entropy."""
    maxent_entropies = []
    lm_entropies = []
    for seed in range(10):
        maxent = solve_max_entropy(_gauss1d(seed))
        assert maxent.converged
        assert maxent.moment_residual_norm <= 1e-6
        maxent_entropies.append(maxent.entropy)

        lm = solve_lm_baseline(_gauss1d(seed))
        assert lm.diameters is not None
        expected = max_entropy_diameters(lm.mixture, SolverOptions())
        assert_allclose(lm.diameters, expected)
        lm_entropies.append(lm.entropy)

    assert min(maxent_entropies) >= max(lm_entropies)


@pytest.mark.slow
def test_lm_baseline_is_not_unique():
    """Tests that LM roots from ten seeds are exact but not all the same."""
    reports = [solve_lm_baseline(_gauss1d(seed)) for seed in range(10)]
    for report in reports:
        assert report.converged
        assert report.moment_residual_norm <= 1e-6

    first = reports[0].mixture.locations
    distances = [_matching_distance(first, r.mixture.locations) for r in reports[1:]]
    assert max(distances) > 1e-3


def test_lm_baseline_is_reproducible_per_seed():
    """Tests that the same seed gives the same LM root."""
    first = solve_lm_baseline(_gauss1d(5))
    second = solve_lm_baseline(_gauss1d(5))
    assert np.array_equal(first.mixture.locations, second.mixture.locations)


@pytest.mark.slow
@pytest.mark.parametrize("L", [16, 20, 30, 40])
def test_symmetric_two_dimensional(L):
    """Tests the symmetric 2-D experiment: exact mean, exact odd moments, feasible."""
    problem = preset("gauss2d_sym").problem(L, SolverOptions(restarts=2))
    report = solve_max_entropy(problem)

    assert report.moment_residual_norm <= 1e-5
    locations = report.mixture.locations
    half = L // 2
    assert np.all(locations[:half] + locations[half:] == 0.0)
    odd = [value for kappa, value in report.residuals if kappa.order % 2]
    assert odd and all(value == 0.0 for value in odd)
    assert check_feasible(locations, report.diameters, 1e-3).feasible
    assert_allclose(report.diameters[:half], report.diameters[half:])

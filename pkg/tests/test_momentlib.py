import math

import numpy as np
import pytest
from numpy.polynomial.hermite_e import hermegauss
from numpy.testing import assert_allclose

from py_diracmix import (
    DegenerateInputError,
    DiracMixture,
    MomentTable,
    MultiIndex,
    ScalarGaussian,
    ScalarGaussianMixture,
    ValidationError,
)
from py_diracmix.momentlib import (
    dirac_moment_gradient,
    dirac_moment_values,
    dirac_moments,
    gaussian_central_moment,
    gaussian_raw_moment,
    gaussian_table,
    mixture_central_moments,
    mixture_raw_moments,
    moment_jacobian,
    order_weights,
    residual,
)
from py_diracmix.multiindex import enumerate_indices, exponent_matrix
from py_diracmix.solver import fd_jacobian

MIXTURE = ScalarGaussianMixture(
    ((0.4, ScalarGaussian(-1.5, 0.7)), (0.6, ScalarGaussian(1.5, 0.7)))
)

# --- Gaussian moments ---


def test_central_moments_of_gaussian():
    """Tests (i-1)!! sigma^i for even i and zero for odd i."""
    assert [gaussian_central_moment(i, 1.0) for i in range(9)] == [
        1.0, 0.0, 1.0, 0.0, 3.0, 0.0, 15.0, 0.0, 105.0,
    ]  # fmt: skip
    assert gaussian_central_moment(4, 2.0) == 48.0


@pytest.mark.parametrize("m, s", [(0.0, 1.0), (1.0, 0.5), (-2.0, 3.0)])
def test_raw_moments_closed_forms(m, s):
    """Tests the first four raw moments against their closed forms."""
    g = ScalarGaussian(m, s)
    expected = [
        1.0,
        m,
        m**2 + s**2,
        m**3 + 3 * m * s**2,
        m**4 + 6 * m**2 * s**2 + 3 * s**4,
    ]
    actual = [gaussian_raw_moment(i, g) for i in range(5)]
    assert_allclose(actual, expected, rtol=1e-14, atol=1e-14)


@pytest.mark.parametrize("m, s", [(0.0, 1.0), (1.0, 0.5), (-2.0, 3.0)])
def test_raw_moments_against_gauss_hermite(m, s):
    """Tests raw moments up to order 8 against 32-node Gauss-Hermite quadrature."""
    nodes, weights = hermegauss(32)
    weights = weights / math.sqrt(2.0 * math.pi)
    g = ScalarGaussian(m, s)
    for i in range(9):
        oracle = float(weights @ (m + s * nodes) ** i)
        assert gaussian_raw_moment(i, g) == pytest.approx(oracle, rel=1e-10, abs=1e-10)


def test_invalid_sigma():
    """Tests that a non-positive standard deviation is rejected."""
    with pytest.raises(
        ValidationError,
        match="Parameter 'sigma' must be strictly positive for function "
        "'gaussian_central_moment'.",
    ):
        gaussian_central_moment(2, 0.0)

    with pytest.raises(ValidationError, match="standard deviation"):
        ScalarGaussian(0.0, -1.0)


def test_mixture_raw_moments():
    """Tests the raw moments of the two-component mixture."""
    raw = mixture_raw_moments(MIXTURE, 4)
    assert raw[0] == 1.0
    assert raw[1] == pytest.approx(0.3)
    assert raw[2] == pytest.approx(2.74)
    assert raw[3] == pytest.approx(1.116)
    assert len(raw) == 5


def test_mixture_central_moments_have_zero_mean():
    """Tests that C_0 = 1 and C_1 = 0 exactly."""
    central = mixture_central_moments(mixture_raw_moments(MIXTURE, 6))
    assert central[0] == 1.0
    assert central[1] == 0.0
    assert central[2] == pytest.approx(2.74 - 0.3**2)


@pytest.mark.slow
def test_mixture_central_moments_against_monte_carlo():
    """Tests central moments up to order 4 against 10^7 samples."""
    rng = np.random.default_rng(7)
    size = 10_000_000
    upper = rng.random(size) < 0.6
    samples = np.where(upper, 1.5, -1.5) + 0.7 * rng.standard_normal(size)
    centred = samples - samples.mean()

    central = mixture_central_moments(mixture_raw_moments(MIXTURE, 4))
    for i in (2, 3, 4):
        assert central[i] == pytest.approx(np.mean(centred**i), rel=1e-2)


def test_central_moments_need_normalized_input():
    """Tests that raw moments must start with E_0 = 1."""
    with pytest.raises(ValidationError, match="must start with E_0 = 1"):
        mixture_central_moments([2.0, 0.0, 1.0])

    with pytest.raises(ValidationError, match="cannot be empty"):
        mixture_central_moments([])


def test_gaussian_table():
    """Tests a standard normal table with and without the zero index."""
    table = gaussian_table(ScalarGaussian(0.0, 1.0), 2)
    assert table.values().tolist() == [1.0, 0.0, 1.0]

    without_zero = gaussian_table(ScalarGaussian(0.0, 1.0), 2, include_zero=False)
    assert without_zero.indices == [MultiIndex.of(1), MultiIndex.of(2)]


# --- Moment tables ---


def test_table_rejects_bad_normalization():
    """Tests that a specified zero-order moment must equal 1."""
    with pytest.raises(ValidationError, match="normalization"):
        MomentTable.from_values(1, {(0,): 0.5, (1,): 0.0})


def test_table_rejects_mismatched_indices():
    """Tests that indices must fit the dimension and order of the table."""
    with pytest.raises(ValidationError, match="does not match table dimension"):
        MomentTable.from_values(2, {(1,): 0.0})

    with pytest.raises(ValidationError, match="exceeds table order"):
        MomentTable(dim=1, order=1, entries={MultiIndex.of(2): 1.0})


def test_table_orders_entries_canonically():
    """Tests that entries are sorted and missing ones stay absent."""
    table = MomentTable.from_values(2, {(2, 0): 1.0, (0, 1): 0.0, (1, 1): 0.5})
    assert [str(k) for k in table.indices] == ["e01", "e11", "e20"]
    assert (1, 0) not in table
    assert table[(1, 1)] == 0.5
    assert table.order == 2


def test_shifted_mean():
    """Tests that only first-order moments move."""
    table = MomentTable.from_values(
        2, {(0, 0): 1.0, (1, 0): 0.0, (0, 1): 1.0, (2, 0): 4.0}
    )
    shifted = table.shifted_mean([2.0, -1.0])
    assert shifted[(1, 0)] == 2.0
    assert shifted[(0, 1)] == 0.0
    assert shifted[(2, 0)] == 4.0
    assert shifted[(0, 0)] == 1.0


# --- Dirac mixtures ---


def test_dirac_mixture_validation():
    """Tests weight normalization, positivity and distinct locations."""
    with pytest.raises(ValidationError, match="must sum to 1"):
        DiracMixture(np.array([[0.0], [1.0]]), np.array([0.5, 0.6]))

    with pytest.raises(ValidationError, match="strictly positive"):
        DiracMixture(np.array([[0.0], [1.0]]), np.array([1.5, -0.5]))

    with pytest.raises(DegenerateInputError, match="pairwise distinct"):
        DiracMixture.equally_weighted(np.array([[0.0, 1.0], [0.0, 1.0]]))

    mixture = DiracMixture(
        np.array([[0.0], [0.0]]), np.array([0.5, 0.5]), check_distinct=False
    )
    assert mixture.size == 2


def test_dirac_moments_symmetric_pair():
    """Tests the moments of two equally weighted points at -1 and 1."""
    mixture = DiracMixture.equally_weighted(np.array([-1.0, 1.0]))
    table = dirac_moments(mixture, 4)
    assert table.values().tolist() == [1.0, 0.0, 1.0, 0.0, 1.0]


def test_dirac_moments_two_dimensional():
    """Tests mixed moments in two dimensions."""
    mixture = DiracMixture(np.array([[1.0, 2.0], [3.0, -1.0]]), np.array([0.25, 0.75]))
    table = dirac_moments(mixture, 2)
    assert table[(1, 0)] == pytest.approx(0.25 * 1 + 0.75 * 3)
    assert table[(1, 1)] == pytest.approx(0.25 * 2 + 0.75 * -3)
    assert table[(0, 2)] == pytest.approx(0.25 * 4 + 0.75 * 1)
    assert len(table) == 6


@pytest.mark.parametrize("a, b", [(2.0, 0.5), (-0.7, 3.0), (1.0, -1.25)])
def test_dirac_moments_under_affine_maps(a, b):
    """Tests e1' = a e1 + b and e2' = a^2 e2 + 2ab e1 + b^2 for y = a x + b."""
    rng = np.random.default_rng(11)
    locations = rng.normal(size=7)
    weights = rng.uniform(0.5, 1.5, size=7)
    weights /= weights.sum()

    before = dirac_moments(DiracMixture(locations, weights), 2)
    after = dirac_moments(DiracMixture(a * locations + b, weights), 2)
    e1, e2 = before[(1,)], before[(2,)]
    assert after[(1,)] == pytest.approx(a * e1 + b, rel=1e-12, abs=1e-12)
    assert after[(2,)] == pytest.approx(a * a * e2 + 2 * a * b * e1 + b * b, rel=1e-12)


def test_moment_values_in_given_order():
    """Tests that moment values follow the requested index order."""
    mixture = DiracMixture.equally_weighted(np.array([1.0, 3.0]))
    values = dirac_moment_values(mixture, [MultiIndex.of(2), MultiIndex.of(1)])
    assert values.tolist() == [5.0, 2.0]


def test_moment_jacobian_matches_finite_differences():
    """Tests the analytic moment Jacobian on 100 random instances."""
    rng = np.random.default_rng(3)
    indices = enumerate_indices(2, 3)
    exponents = exponent_matrix(indices)
    for _ in range(100):
        locations = rng.standard_normal((3, 2))
        weights = rng.dirichlet(np.ones(3))

        def moments(flat, weights=weights):
            points = flat.reshape(3, 2)
            return weights @ np.prod(points[None] ** exponents[:, None], axis=2).T

        analytic = moment_jacobian(locations, weights, exponents)
        analytic = analytic.reshape(len(indices), -1)
        numeric = fd_jacobian(moments, locations.reshape(-1))
        assert_allclose(analytic, numeric, rtol=1e-5, atol=1e-8)


def test_moment_gradient_shape():
    """Tests that a single moment gradient is an (N, L) matrix."""
    mixture = DiracMixture.equally_weighted(np.array([[1.0, 2.0], [0.5, -1.0]]))
    gradient = dirac_moment_gradient(mixture, (1, 1))
    assert gradient.shape == (2, 2)
    assert_allclose(gradient[:, 0], [0.5 * 2.0, 0.5 * 1.0])


# --- Residuals ---


def test_residual_over_target_indices():
    """Tests residuals and their norm over the specified indices only."""
    mixture = DiracMixture.equally_weighted(np.array([-1.0, 1.0]))
    target = MomentTable.from_values(1, {(1,): 0.5, (2,): 2.0})
    diff, norm = residual(dirac_moments(mixture, 2), target)
    assert diff.tolist() == [-0.5, -1.0]
    assert norm == pytest.approx(math.sqrt(1.25))


def test_residual_weighting():
    """Tests relative and per-order weighting; zero weight drops an index."""
    mixture = DiracMixture.equally_weighted(np.array([-1.0, 1.0]))
    target = MomentTable.from_values(1, {(1,): 0.5, (2,): 4.0})
    actual = dirac_moments(mixture, 2)

    diff, _ = residual(actual, target, "relative")
    assert_allclose(diff, [-0.5, -3.0 / 4.0])

    diff, norm = residual(actual, target, order_weights(target, {2: 0.0}))
    assert diff.tolist() == [-0.5, 0.0]
    assert norm == 0.5


def test_residual_dimension_mismatch():
    """Tests that tables must agree in dimension."""
    one_d = MomentTable.from_values(1, {(1,): 0.0})
    two_d = MomentTable.from_values(2, {(1, 0): 0.0})
    with pytest.raises(ValidationError, match="dimension 1 and 2"):
        residual(one_d, two_d)


def test_residual_over_shared_indices():
    """Tests that target indices missing from the actual table are skipped."""
    actual = MomentTable.from_values(1, {(1,): 0.25}, 2)
    target = MomentTable.from_values(1, {(1,): 0.0, (2,): 1.0})
    diff, norm = residual(actual, target)
    assert diff.tolist() == [0.25]
    assert norm == 0.25

    diff, _ = residual(actual, target, order_weights(target, {1: 2.0}))
    assert diff.tolist() == [0.5]

    diff, norm = residual(MomentTable.from_values(1, {(3,): 1.0}), target)
    assert diff.size == 0
    assert norm == 0.0

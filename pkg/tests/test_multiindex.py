import numpy as np
import pytest

from py_diracmix import MomentRangeError, MultiIndex, ValidationError
from py_diracmix.multiindex import (
    count_moments,
    enumerate_indices,
    exponent_matrix,
    monomial,
)


def test_count_moments_known_values():
    """Tests the counts for ten dimensions up to orders three and five."""
    assert count_moments(10, 3) == 286
    assert count_moments(10, 5) == 3003


@pytest.mark.parametrize("N", range(1, 7))
def test_count_matches_enumeration(N):
    """Tests that counting agrees with enumeration for N <= 6, M <= 8."""
    for M in range(9):
        indices = enumerate_indices(N, M)
        assert len(indices) == count_moments(N, M)
        assert len(set(indices)) == len(indices)
        assert all(kappa.order <= M for kappa in indices)


def test_enumeration_is_graded_lexicographic():
    """Tests the canonical order in two dimensions."""
    expected = [(0, 0), (0, 1), (1, 0), (0, 2), (1, 1), (2, 0)]
    assert [kappa.exponents for kappa in enumerate_indices(2, 2)] == expected
    assert enumerate_indices(3, 4) == sorted(enumerate_indices(3, 4))


def test_zero_order_enumeration():
    """Tests that order zero yields only the zero index."""
    assert enumerate_indices(4, 0) == [MultiIndex.zero(4)]


def test_count_moments_out_of_range():
    """Tests that counting beyond the supported range raises MomentRangeError."""
    with pytest.raises(
        MomentRangeError,
        match="Parameter 'N' must be within \\[1, 16\\] for function 'count_moments'.",
    ):
        count_moments(17, 2)

    with pytest.raises(MomentRangeError, match="Parameter 'M'"):
        count_moments(2, 17)


def test_negative_exponent_rejected():
    """Tests that negative exponents are invalid."""
    with pytest.raises(ValidationError, match="non-negative"):
        MultiIndex.of(1, -1)


def test_multi_index_properties():
    """Tests order, dimension, addition and the compact string form."""
    kappa = MultiIndex.of(1, 2)
    assert kappa.order == 3
    assert kappa.dim == 2
    assert str(kappa) == "e12"
    assert kappa + MultiIndex.of(0, 1) == MultiIndex.of(1, 3)
    assert MultiIndex.zero(2).is_zero

    with pytest.raises(ValidationError, match="dimension 2 and 3"):
        kappa + MultiIndex.of(0, 0, 1)


def test_monomial():
    """Tests evaluation of x^kappa."""
    assert monomial([2.0, 3.0], (1, 2)) == 18.0
    assert monomial([5.0, -1.0], (0, 0)) == 1.0
    assert monomial([-2.0], (3,)) == -8.0

    with pytest.raises(ValidationError, match="does not match"):
        monomial([1.0, 2.0, 3.0], (1, 1))


@pytest.mark.parametrize("N", [1, 2, 4])
def test_monomial_of_summed_indices_is_a_product(N):
    """Tests x^(kappa + lambda) = x^kappa * x^lambda on random points."""
    rng = np.random.default_rng(N)
    for _ in range(20):
        x = rng.uniform(-1.5, 1.5, size=N)
        kappa = MultiIndex.of(*rng.integers(0, 4, size=N).tolist())
        lam = MultiIndex.of(*rng.integers(0, 4, size=N).tolist())
        assert monomial(x, kappa + lam) == pytest.approx(
            monomial(x, kappa) * monomial(x, lam), rel=1e-12, abs=1e-300
        )


def test_exponent_matrix_shape():
    """Tests that multi-indices stack row by row."""
    matrix = exponent_matrix(enumerate_indices(3, 2))
    assert matrix.shape == (10, 3)
    assert matrix[0].tolist() == [0, 0, 0]
    assert matrix[-1].tolist() == [2, 0, 0]

"""Test the copositive cones, the brute-force oracle and the DPS bridge."""

import numpy as np
import pytest

from dpskit.cop import (
    completely_positive_gram,
    copositive_brute_oracle,
    dps_cp_bridge_check,
    horn_matrix,
    is_dnn,
    k0_membership,
    kt_coefficients,
    kt_membership,
    parity_classes,
    search_objective,
    simplex_grid,
)
from dpskit.enums import SolveStatus, Verdict
from dpskit.exceptions import DimensionMismatchError, ParameterError


@pytest.mark.integration
def test_horn_levels() -> None:
    """The Horn matrix is outside K^(0) and inside K^(1)."""
    horn = horn_matrix()
    assert k0_membership(horn) is Verdict.INFEASIBLE
    assert kt_membership(horn, 1) is Verdict.FEASIBLE


@pytest.mark.unit
def test_k0_simple_members() -> None:
    """PSD and entrywise nonnegative matrices are in K^(0), -I is not."""
    assert k0_membership(np.eye(3)) is Verdict.FEASIBLE
    assert k0_membership(np.ones((3, 3))) is Verdict.FEASIBLE
    assert k0_membership(-np.eye(3)) is Verdict.INFEASIBLE


@pytest.mark.unit
def test_kt_level_zero() -> None:
    """(x o x)^T A (x o x) is SOS for A = I and not for -I."""
    assert kt_membership(np.eye(2), 0) is Verdict.FEASIBLE
    assert kt_membership(-np.eye(2), 0) is Verdict.INFEASIBLE
    with pytest.raises(ParameterError):
        kt_membership(np.eye(2), -1)


@pytest.mark.unit
@pytest.mark.parametrize(
    ("a", "expected"),
    [
        (np.eye(3), 1 / 3),
        (-np.ones((3, 3)), -1.0),
        (horn_matrix(), 0.0),
    ],
)
def test_brute_oracle(a, expected) -> None:
    """Grid minima of x^T A x over the simplex."""
    assert copositive_brute_oracle(a, 6) == pytest.approx(expected, abs=1e-12)


@pytest.mark.unit
def test_brute_oracle_limits() -> None:
    """n above six and empty grids are refused."""
    with pytest.raises(ParameterError):
        copositive_brute_oracle(np.eye(7), 2)
    with pytest.raises(ParameterError):
        copositive_brute_oracle(np.eye(2), 0)


@pytest.mark.unit
def test_simplex_grid() -> None:
    """Points sum to one and repeats across depths appear once."""
    grid = simplex_grid(2, 2)
    assert np.allclose(grid.sum(axis=1), 1.0)
    assert grid.tolist() == [[0.0, 1.0], [0.5, 0.5], [1.0, 0.0]]


@pytest.mark.unit
def test_is_dnn() -> None:
    """PSD and nonnegative both matter."""
    assert is_dnn(np.eye(2))
    assert not is_dnn([[1.0, -1.0], [-1.0, 1.0]])
    assert not is_dnn([[0.0, 1.0], [1.0, 0.0]])
    assert is_dnn(completely_positive_gram([[1.0, 2.0], [0.5, 0.0]]))
    with pytest.raises(ParameterError):
        completely_positive_gram([[1.0, -1.0]])


@pytest.mark.unit
def test_kt_coefficients() -> None:
    """Coefficients of x^(2 eta) in ||x||^(2t) (x o x)^T A (x o x)."""
    assert kt_coefficients(np.eye(2), 0) == {(2, 0): 1.0, (0, 2): 1.0}
    assert kt_coefficients([[0.0, 1.0], [1.0, 0.0]], 0) == {(1, 1): 2.0}
    assert kt_coefficients(np.eye(2), 1) == {
        (3, 0): 1.0,
        (1, 2): 1.0,
        (2, 1): 1.0,
        (0, 3): 1.0,
    }


@pytest.mark.unit
def test_parity_classes() -> None:
    """Degree-two monomials in two variables split by exponent parity."""
    assert parity_classes(2, 2) == [[(0, 2), (2, 0)], [(1, 1)]]


@pytest.mark.integration
def test_bridge_on_a_dnn_matrix() -> None:
    """A DNN X gives a member at t = 1 and the two sides agree."""
    report = dps_cp_bridge_check([[2.0, 1.0], [1.0, 2.0]], 1)
    assert report.dnn is True
    assert report.dps_verdict is Verdict.FEASIBLE
    assert report.consistent


@pytest.mark.integration
def test_bridge_on_a_negative_matrix() -> None:
    """A negative entry makes both sides reject X."""
    report = dps_cp_bridge_check([[1.0, -0.5], [-0.5, 1.0]], 1)
    assert report.dnn is False
    assert report.dps_verdict is Verdict.INFEASIBLE
    assert report.consistent


@pytest.mark.unit
def test_bridge_needs_positive_level() -> None:
    """t = 0 has no Bose-symmetric extension to test."""
    with pytest.raises(ParameterError):
        dps_cp_bridge_check(np.eye(2), 0)


@pytest.mark.integration
def test_search_with_identity_cost() -> None:
    """min tr X over the feasible X is attained at X = 0."""
    result = search_objective(np.eye(2), t=2)
    assert result.status is SolveStatus.OPTIMAL
    assert result.objective == pytest.approx(0.0, abs=1e-5)
    assert np.array(result.x).shape == (2, 2)


@pytest.mark.unit
def test_search_checks_dimension() -> None:
    """An explicit n must match C."""
    with pytest.raises(DimensionMismatchError):
        search_objective(np.eye(3), t=2, n=4)


@pytest.mark.slow
def test_search_with_horn_cost() -> None:
    """Horn is in K^(1), so no level-two X pairs negatively with it."""
    result = search_objective(horn_matrix(), t=2)
    assert result.status is SolveStatus.OPTIMAL
    assert abs(result.objective) <= 1e-5


def _random_symmetric(rng: np.random.Generator, n: int) -> np.ndarray:
    """Symmetric entries in [-1, 1] with a random diagonal shift."""
    b = rng.uniform(-1.0, 1.0, (n, n))
    return (b + b.T) / 2 + rng.uniform(0.0, 2.0) * np.eye(n)


def _random_gram(rng: np.random.Generator, n: int, kind: int) -> np.ndarray:
    """Gram matrices with nonnegative, signed or perturbed factors."""
    if kind == 0:
        v = rng.uniform(0.0, 1.0, (n, n + 2))
        return v @ v.T
    if kind == 1:
        v = rng.standard_normal((n, n + 2))
        return v @ v.T
    x = np.eye(n) + rng.uniform(0.0, 1.0, (n, n))
    return (x + x.T) / 2


@pytest.mark.integration
def test_k0_matches_level_zero_sums_of_squares(rng) -> None:
    """P + N splits exist exactly when level 0 has a Gram matrix."""
    for _ in range(30):
        a = _random_symmetric(rng, 4)
        assert k0_membership(a) is kt_membership(a, 0)


@pytest.mark.integration
def test_kt_levels_are_nested(rng) -> None:
    """K^(0) members are K^(1) members."""
    for _ in range(30):
        a = _random_symmetric(rng, 4)
        if kt_membership(a, 0) is Verdict.FEASIBLE:
            assert kt_membership(a, 1) is Verdict.FEASIBLE


@pytest.mark.slow
def test_kt_levels_are_nested_further_up(rng) -> None:
    """K^(1) members are K^(2) members, Horn included."""
    samples = [horn_matrix().entries]
    samples += [_random_symmetric(rng, 4) for _ in range(10)]
    for a in samples:
        if kt_membership(a, 1) is Verdict.FEASIBLE:
            assert kt_membership(a, 2) is Verdict.FEASIBLE


@pytest.mark.integration
def test_level_one_bridge_is_the_dnn_test(rng) -> None:
    """At t = 1 the bridge state is accepted iff X is doubly nonnegative."""
    for k in range(30):
        x = _random_gram(rng, 3, k % 3)
        report = dps_cp_bridge_check(x, 1)
        assert report.consistent
        assert (report.dps_verdict is Verdict.FEASIBLE) == is_dnn(x)

import numpy as np
import pytest

from src.common.errors import DirichletProximityError
from src.common.models import PotentialSpec
from src.graph.tree import expand_truncated_tree
from src.green.engine import BoundaryRule, wt_recursion
from src.green.kernel import EdgePoint
from src.oracle.discretize import oracle_green, oracle_kernel, spectral_bottom_estimate
from src.oracle.reduction import discrete_reduction, reduction_zeros
from src.oracle.reference import interval_green, regular_tree_reference
from src.oracle.star import star_bottom, star_function

# cos sqrt(lam) = -1/3 on the complete graph K4 with unit edges
K4_ZEROS = (np.arccos(-1 / 3) ** 2, (2 * np.pi - np.arccos(-1 / 3)) ** 2)


def test_star_bottom_unit_edges():
    for degree in (2, 3, 5):
        assert star_bottom([1.0] * degree).e0 == pytest.approx(np.pi**2 / 4, rel=1e-10)


def test_star_bottom_with_coupling():
    bottom = star_bottom([1.0, 1.0, 1.0], alpha=2.0)
    assert np.pi**2 / 4 < bottom.e0 < np.pi**2
    assert star_function(bottom.e0, [1.0] * 3, [PotentialSpec()] * 3) == pytest.approx(2.0, abs=1e-8)
    assert bottom.dirichlet_bottom == pytest.approx(np.pi**2)


def test_star_bottom_rejects_bad_input():
    with pytest.raises(ValueError):
        star_bottom([1.0])
    with pytest.raises(ValueError):
        star_bottom([1.0, -1.0])


def test_triangle_reduction_zeros(triangle):
    zeros = reduction_zeros(triangle, 0.5, 30.0)
    assert [z.multiplicity for z in zeros] == [2, 2]
    np.testing.assert_allclose([z.lam for z in zeros], [(2 * np.pi / 3) ** 2, (4 * np.pi / 3) ** 2], rtol=1e-9)


def test_k4_reduction_zeros(k4):
    zeros = reduction_zeros(k4, 0.5, 25.0)
    assert [z.multiplicity for z in zeros] == [3, 3]
    np.testing.assert_allclose([z.lam for z in zeros], K4_ZEROS, rtol=1e-9)


def test_discrete_reduction(triangle):
    at_zero = discrete_reduction(triangle, (2 * np.pi / 3) ** 2)
    assert at_zero.residual < 1e-8
    assert np.allclose(at_zero.matrix, at_zero.matrix.T)
    assert discrete_reduction(triangle, 3.0).residual > 1e-3
    with pytest.raises(DirichletProximityError):
        discrete_reduction(triangle, np.pi**2)
    with pytest.raises(ValueError):
        reduction_zeros(triangle, 5.0, 1.0)


def test_regular_reference_in_band():
    reference = regular_tree_reference(2, z=5.0)
    assert reference.in_band
    assert abs(reference.zeta) ** 2 == pytest.approx(0.5, rel=1e-10)
    assert reference.h.imag > 0
    assert not regular_tree_reference(2, z=5 + 0.1j).in_band
    with pytest.raises(ValueError):
        regular_tree_reference(0)


def test_interval_green_is_symmetric():
    z = 3 + 0.5j
    assert interval_green(2.0, z, 0.3, 1.4) == pytest.approx(interval_green(2.0, z, 1.4, 0.3))
    assert interval_green(2.0, z, 0.0, 1.0) == 0


def test_oracle_matches_recursion(binary_tree):
    z = 3 + 0.5j
    tree = expand_truncated_tree(binary_tree, 2)
    state = wt_recursion(tree, z, BoundaryRule(kind="dirichlet"))
    oracle = oracle_green(tree, z, vertices=[0, 1, 2])
    expected = [state.green_at(v) for v in (0, 1, 2)]
    np.testing.assert_allclose(oracle.values, expected, rtol=1e-4)
    assert oracle.refinement_gap < 1e-2


def test_oracle_on_the_interval(line):
    z = 2 + 0.5j
    oracle = oracle_green(expand_truncated_tree(line, 1), z, vertices=[0])
    assert oracle.values[0] == pytest.approx(complex(interval_green(2.0, z, 1.0)), rel=1e-4)


def test_oracle_rejects_bad_input(line):
    tree = expand_truncated_tree(line, 1)
    with pytest.raises(ValueError):
        oracle_green(tree, 2.0)
    with pytest.raises(ValueError):
        oracle_green(tree, 2 + 1j, step=0.5)


def test_spectral_bottom_of_interval(line):
    bottom = spectral_bottom_estimate(expand_truncated_tree(line, 1))
    assert bottom == pytest.approx(np.pi**2 / 4, rel=1e-3)


def test_random_stars_stay_below_dirichlet_bottom():
    rng = np.random.default_rng(4)
    for _ in range(50):
        degree = int(rng.integers(2, 6))
        lengths = rng.uniform(0.3, 2.0, size=degree)
        bottom = star_bottom(lengths, alpha=float(rng.uniform(-1.0, 3.0)))
        assert bottom.e0 < bottom.dirichlet_bottom
        assert bottom.dirichlet_bottom == pytest.approx((np.pi / lengths.max()) ** 2)


def test_oracle_kernel_on_the_interval(line):
    z = 2 + 0.5j
    tree = expand_truncated_tree(line, 1)
    value = oracle_kernel(tree, z, EdgePoint(0, 0.25), EdgePoint(1, 0.5))
    assert value == pytest.approx(complex(interval_green(2.0, z, 0.25, 1.5)), rel=1e-4)

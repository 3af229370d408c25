import numpy as np
import pytest

from src.common.errors import DirichletProximityError, HerglotzViolation, NonConvergence
from src.cone.bands import classify_point, detect_bands
from src.cone.solver import (
    coupling_matrix,
    f_coefficients,
    label_monodromy,
    limit_on_axis,
    newton_solve,
    perron_weights,
    richardson,
    solve_cone_system,
)
from src.graph.core import build_universal_cover_system
from src.oracle.reference import regular_tree_band_edges, regular_tree_reference

# |cos sqrt(lam)| < 2 sqrt(2)/3 inside the bands of the binary tree
BAND_COS = 2 * np.sqrt(2) / 3


def test_solver_matches_regular_reference(binary_tree):
    for z in (1 + 1j, 5 + 0.1j, 20 + 2j):
        vector = solve_cone_system(binary_tree, z)
        reference = regular_tree_reference(2, z=z)
        assert vector.r_plus[0] == pytest.approx(reference.r_plus, rel=1e-9)
        assert vector.residual < 1e-10
        assert vector.h[0].imag > 0


def test_multiplier_bound(binary_tree):
    for z in (0.5 + 0.01j, 5 + 0.01j, 11 + 0.5j):
        vector = solve_cone_system(binary_tree, z)
        assert abs(vector.zeta[0]) ** 2 <= 1 / 2 + 1e-9


def test_solver_preconditions(binary_tree):
    with pytest.raises(ValueError):
        solve_cone_system(binary_tree, 5.0)
    with pytest.raises(HerglotzViolation):
        solve_cone_system(binary_tree, 1 + 1j, initial=np.array([-1j]))


def test_perron_weights_single_label(binary_tree):
    vector = solve_cone_system(binary_tree, 2 + 1j)
    _, weights = perron_weights(binary_tree, vector)
    assert np.sum(weights) == pytest.approx(1.0)


def test_richardson_removes_linear_and_quadratic_terms():
    etas = [0.04, 0.02, 0.01]
    values = [np.array([1.0 + 2.0 * e + 3.0 * e**2]) for e in etas]
    limit, _ = richardson(etas, values)
    assert limit[0] == pytest.approx(1.0, abs=1e-12)


def test_axis_limit_in_band(binary_tree):
    limit = limit_on_axis(binary_tree, 5.0)
    reference = regular_tree_reference(2, z=5.0)
    assert limit.converged
    assert limit.r_plus[0].imag > 0
    assert limit.r_plus[0] == pytest.approx(reference.r_plus, abs=1e-6)


def test_axis_limit_in_gap(binary_tree):
    limit = limit_on_axis(binary_tree, 0.05)
    assert abs(limit.r_plus[0].imag) < 1e-6


def test_axis_limit_guard(binary_tree):
    with pytest.raises(DirichletProximityError):
        limit_on_axis(binary_tree, np.pi**2)


def test_classify_point(binary_tree):
    assert classify_point(binary_tree, 5.0).status == "band"
    assert classify_point(binary_tree, 0.05).status == "gap"
    assert classify_point(binary_tree, np.pi**2).status == "dirichlet"


def test_band_edges_of_binary_tree(binary_tree):
    report = detect_bands(binary_tree, np.linspace(0.5, 9.0, 30))
    assert len(report.bands) == 1
    lo, hi = report.bands[0]
    assert lo == pytest.approx(0.5)
    assert hi == pytest.approx((np.pi - np.arccos(BAND_COS)) ** 2, abs=1e-3)
    assert report.contains(5.0)
    assert not report.contains(8.5)


def test_k4_cover_has_bands(k4):
    system = build_universal_cover_system(k4)
    assert classify_point(system, 5.0).status == "band"


def test_regular_band_edges_closed_form():
    bands = regular_tree_band_edges(2, lam_max=15.0)
    (lo1, hi1), (lo2, hi2) = bands
    for edge in (lo1, hi1, lo2):
        assert abs(np.cos(np.sqrt(edge))) == pytest.approx(BAND_COS, abs=1e-9)
    assert hi2 == 15.0


def test_detect_bands_rejects_bad_grids(binary_tree):
    with pytest.raises(ValueError):
        detect_bands(binary_tree, [])
    with pytest.raises(ValueError):
        detect_bands(binary_tree, [2.0, 1.0])


def test_newton_returns_to_the_solution(binary_tree):
    z = 3 + 0.5j
    vector = solve_cone_system(binary_tree, z)
    edge = label_monodromy(binary_tree, z)
    A, F = coupling_matrix(binary_tree, edge), f_coefficients(binary_tree, z, edge)
    h, converged = newton_solve(A, F, vector.h * (1 + 1e-3))
    assert converged
    np.testing.assert_allclose(h, vector.h, rtol=1e-10)


def test_unpolished_solution_fails_residual_check(binary_tree):
    assert solve_cone_system(binary_tree, 5 + 0.1j).residual < 1e-11
    with pytest.raises(NonConvergence) as excinfo:
        solve_cone_system(binary_tree, 5 + 0.1j, tol=1e-6, polish_steps=0)
    assert np.all(excinfo.value.last.imag > 0)

import dataclasses

import numpy as np
import pytest

from src.common.errors import BacktrackingPathError
from src.common.models import EnsembleConfig
from src.cone.solver import solve_cone_system
from src.graph.core import build_universal_cover_system
from src.graph.tree import ORIGIN, expand_truncated_tree
from src.green.engine import (
    BoundaryRule,
    WTState,
    ac_criterion_integral,
    green_diag,
    green_offdiag,
    tree_path,
    vertex_green,
    wt_recursion,
)
from src.green.identities import identity_suite
from src.green.kernel import EdgePoint, green_kernel, im_quadratic_form, kernel_quadratic_form
from src.oracle.reference import interval_green
from src.perturb.contraction import cayley_rotation_residual
from src.perturb.ensemble import sample_random_tree


def test_free_line_green(line):
    z = 2 + 1j
    state = wt_recursion(expand_truncated_tree(line, 3), z)
    expected = 1j / (2 * np.sqrt(z))
    for vertex in (ORIGIN, 0, 1, 2):
        assert green_diag(state, vertex).value == pytest.approx(expected, rel=1e-12)
    assert identity_suite(state, tol=1e-12).passed


def test_dirichlet_interval_green(line):
    z = 3 + 0.5j
    state = wt_recursion(expand_truncated_tree(line, 1), z, BoundaryRule(kind="dirichlet"))
    assert state.green_at(0) == pytest.approx(complex(interval_green(2.0, z, 1.0)), rel=1e-12)
    assert state.origin_green() == 0


def test_identities_on_binary_tree(binary_tree):
    tree = expand_truncated_tree(binary_tree, 6)
    for boundary in ("free", "dirichlet", "neumann"):
        report = identity_suite(wt_recursion(tree, 3 + 0.5j, BoundaryRule(kind=boundary)))
        assert report.passed, report.failures()
        assert report.lower_bound_ratio > 0


def test_identities_on_kite_cover(kite):
    system = build_universal_cover_system(kite)
    tree = expand_truncated_tree(system, 5)
    report = identity_suite(wt_recursion(tree, 6 + 0.2j))
    assert report.passed, report.failures()


def test_identities_on_random_trees(binary_tree):
    config = EnsembleConfig(eps=0.1, seed=11)
    for sample in range(10):
        tree = sample_random_tree(binary_tree, config, 5, sample)
        report = identity_suite(wt_recursion(tree, 4 + 0.3j))
        assert report.passed, report.failures()


def test_cone_boundary_is_exact(binary_tree):
    z = 5 + 0.2j
    state = wt_recursion(expand_truncated_tree(binary_tree, 4), z, BoundaryRule.cone(binary_tree, z))
    expected = solve_cone_system(binary_tree, z).r_plus[0]
    np.testing.assert_allclose(state.r_plus_origin, expected, rtol=1e-10)


def test_real_energy_in_band(binary_tree):
    state = wt_recursion(expand_truncated_tree(binary_tree, 4), 5.0, BoundaryRule.cone(binary_tree, 5.0))
    report = identity_suite(state, tol=1e-6)
    assert report.get("current").passed
    assert np.all(state.r_plus_origin.imag > 0)


def test_real_energy_needs_cone_boundary(binary_tree):
    with pytest.raises(ValueError):
        wt_recursion(expand_truncated_tree(binary_tree, 2), 5.0)


def test_cayley_rotation(binary_tree):
    state = wt_recursion(expand_truncated_tree(binary_tree, 4), 2 + 0.5j)
    assert cayley_rotation_residual(state) < 1e-10


def test_offdiagonal_forms_agree(binary_tree):
    state = wt_recursion(expand_truncated_tree(binary_tree, 3), 3 + 0.5j)
    forward, reverse = green_offdiag(state, [0, 1, 3])
    assert forward == pytest.approx(reverse, rel=1e-10)
    assert tree_path(state.tree, 3, 5) == [3, 1, 0, 2, 5]
    assert vertex_green(state, 5, 3) == pytest.approx(vertex_green(state, 3, 5), rel=1e-10)
    with pytest.raises(BacktrackingPathError):
        green_offdiag(state, [1, 0, 1])
    with pytest.raises(BacktrackingPathError):
        green_offdiag(state, [0, 5])


def test_green_diag_rejects_unknown_vertex(binary_tree):
    state = wt_recursion(expand_truncated_tree(binary_tree, 2), 1 + 1j)
    with pytest.raises(ValueError):
        green_diag(state, 99)


def test_state_json_replay(binary_tree):
    state = wt_recursion(expand_truncated_tree(binary_tree, 3), 3 + 0.5j)
    restored = WTState.from_json(state.to_json())
    np.testing.assert_array_equal(restored.zeta, state.zeta)
    np.testing.assert_array_equal(restored.r_minus_origin, state.r_minus_origin)
    assert identity_suite(restored).passed


def test_corrupted_zeta_fails_named_identity(binary_tree):
    state = wt_recursion(expand_truncated_tree(binary_tree, 3), 3 + 0.5j)
    zeta = state.zeta.copy()
    zeta[0] *= 1.001
    report = identity_suite(dataclasses.replace(state, zeta=zeta))
    assert "zeta_wt" in [f.name for f in report.failures()]


def test_line_kernel(line):
    z = 2 + 1j
    k = np.sqrt(z)
    state = wt_recursion(expand_truncated_tree(line, 3), z)
    same = green_kernel(state, EdgePoint(1, 0.3), EdgePoint(1, 0.7))
    assert same == pytest.approx(1j * np.exp(1j * k * 0.4) / (2 * k), rel=1e-10)
    apart = green_kernel(state, EdgePoint(1, 0.2), EdgePoint(2, 0.5))
    assert apart == pytest.approx(1j * np.exp(1j * k * 1.3) / (2 * k), rel=1e-10)


def test_quadratic_forms_agree(binary_tree):
    state = wt_recursion(expand_truncated_tree(binary_tree, 4), 3 + 0.5j)
    im_form = im_quadratic_form(state, 1, lambda x: np.ones_like(x))
    direct = kernel_quadratic_form(state, 1, lambda x: np.ones_like(x))
    assert im_form > 0
    assert im_form == pytest.approx(direct.imag, rel=1e-6)


def test_criterion_integral_in_band(binary_tree):
    criterion = ac_criterion_integral(binary_tree, (3.0, 5.0), [0.5, 0.25], n_points=11)
    values = np.asarray(criterion.values)
    assert values.shape == (2, 1)
    assert np.all(np.isfinite(values)) and np.all(values > 0)

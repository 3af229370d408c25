import networkx as nx
import pytest

from src.common.errors import ConditionViolation, TreeSizeError
from src.common.models import ConeSystem, PotentialSpec, QuantumGraphSpec
from src.graph.core import (
    build_universal_cover_system,
    check_conditions,
    dominating_child,
    is_hamiltonian,
    require_conditions,
)
from src.graph.tree import MIDPOINT, ORIGIN, expand_truncated_tree, level_counts, orient_tree


def test_k4_cover_is_binary_tree(k4):
    system = build_universal_cover_system(k4)
    assert system.matrix == [[2]]
    assert system.reverse == [0]
    assert check_conditions(system).all_passed


def test_kite_cover_labels(kite):
    system = build_universal_cover_system(kite)
    assert system.size > 1
    assert len(system.reverse) == system.size
    for j in range(system.size):
        assert system.reverse[system.reverse[j]] == j
    assert not check_conditions(system).c0.passed
    require_conditions(system)


def test_cover_rejects_degree_one(k4):
    path = QuantumGraphSpec.equilateral(nx.path_graph(3))
    with pytest.raises(ConditionViolation):
        build_universal_cover_system(path)
    with pytest.raises(ValueError):
        build_universal_cover_system(k4, root_edge=(0, 7))


def test_c1_star_witness():
    system = ConeSystem(
        matrix=[[1, 1], [0, 2]],
        lengths=[1.0, 1.0],
        potentials=[PotentialSpec(), PotentialSpec()],
        couplings=[0.0, 0.0],
    )
    with pytest.raises(ConditionViolation) as exc:
        require_conditions(system)
    assert exc.value.condition == "C1*"
    assert exc.value.witness == [2, 1]


def test_dominating_child(binary_tree):
    assert dominating_child(binary_tree, 0) == 0
    system = ConeSystem(
        matrix=[[0, 1, 1], [1, 0, 1], [1, 1, 0]],
        lengths=[1.0] * 3,
        potentials=[PotentialSpec()] * 3,
        couplings=[0.0] * 3,
    )
    assert dominating_child(system, 0) is None
    assert not check_conditions(system).c2.passed


def test_level_counts(binary_tree):
    assert level_counts(binary_tree, 3) == [1, 2, 4, 8]


def test_expand_truncated_tree(binary_tree):
    tree = expand_truncated_tree(binary_tree, 3)
    assert tree.size == 15
    assert len(tree.leaves) == 8
    assert tree.children(0).tolist() == [1, 2]
    assert tree.path_to_root(3) == [3, 1, 0, ORIGIN]
    assert tree.neighbours(ORIGIN) == [0]
    assert tree.max_depth == 3
    assert tree.to_networkx().number_of_edges() == 15


def test_expand_limits(binary_tree):
    with pytest.raises(ValueError):
        expand_truncated_tree(binary_tree, 0)
    with pytest.raises(TreeSizeError):
        expand_truncated_tree(binary_tree, 3, max_vertices=5)


def test_is_hamiltonian():
    assert is_hamiltonian(nx.complete_graph(4)) is True
    assert is_hamiltonian(nx.star_graph(3)) is False
    assert is_hamiltonian(nx.complete_graph(12)) is None


def test_orient_tree():
    oriented = orient_tree(nx.path_graph(4), (1, 2))
    assert oriented.side[3] == 1
    assert oriented.side[0] == -1
    assert oriented.twisted_parent[1] == MIDPOINT
    assert oriented.coherent_parent[2] == 1
    assert oriented.forward_neighbours(2) == [3]
    assert oriented.edge_of_vertex(2) == ("root", 1)

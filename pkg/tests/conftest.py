import networkx as nx
import pytest

from src.common.models import ConeSystem, EdgeSpec, QuantumGraphSpec


@pytest.fixture
def binary_tree() -> ConeSystem:
    """Equilateral 3-regular tree (q = 2), unit lengths, Kirchhoff vertices."""
    return ConeSystem.regular(2)


@pytest.fixture
def line() -> ConeSystem:
    """The real line as a 1-label cone with one child per vertex."""
    return ConeSystem.regular(1)


@pytest.fixture
def k4() -> QuantumGraphSpec:
    return QuantumGraphSpec.equilateral(nx.complete_graph(4))


@pytest.fixture
def triangle() -> QuantumGraphSpec:
    return QuantumGraphSpec.equilateral(nx.cycle_graph(3))


@pytest.fixture
def kite() -> QuantumGraphSpec:
    """K4 minus one edge with unequal lengths and one coupling; several cone labels."""
    return QuantumGraphSpec(
        vertices=[0, 1, 2, 3],
        edges=[
            EdgeSpec(u=0, v=1, length=1.0),
            EdgeSpec(u=1, v=2, length=1.3),
            EdgeSpec(u=2, v=3, length=0.8),
            EdgeSpec(u=3, v=0, length=1.1),
            EdgeSpec(u=0, v=2, length=0.9),
        ],
        couplings={0: 0.5},
    )

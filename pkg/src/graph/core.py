"""Cone-type extraction from finite base graphs and structural condition checks."""

import itertools
import logging
from dataclasses import dataclass
from typing import Optional

import networkx as nx
import numpy as np
from pydantic import BaseModel, Field

from src.common.errors import ConditionViolation
from src.common.models import ConeSystem, PotentialSpec, QuantumGraphSpec

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class DirectedEdge:
    """Directed base edge tail -> head with its oriented potential."""

    tail: int
    head: int
    length: float
    potential: PotentialSpec


def directed_edges(base: QuantumGraphSpec) -> list[DirectedEdge]:
    """Both orientations of every base edge, the reversed one with W(L - x)."""
    out = []
    for edge in base.edges:
        out.append(DirectedEdge(edge.u, edge.v, edge.length, edge.potential))
        out.append(DirectedEdge(edge.v, edge.u, edge.length, edge.potential.reversed()))
    return out


def _relabel(keys: list) -> list[int]:
    """Assign consecutive class ids in order of first appearance."""
    ids: dict = {}
    return [ids.setdefault(key, len(ids)) for key in keys]


def build_universal_cover_system(
    base: QuantumGraphSpec,
    root_edge: Optional[tuple[int, int]] = None,
) -> ConeSystem:
    """Cone system of the universal cover of ``base``.

    Directed base edges are merged into one label when their data
    (L, W, alpha at the head), the multiset of child labels and the label of
    the reversed edge coincide; the partition is refined to a fixed point.

    Args:
        base: Finite connected base graph with minimal degree >= 2
        root_edge: Directed base edge (tail, head) lifted to the root edge b_o;
            defaults to the first edge as listed

    Returns:
        ConeSystem with a consistent reverse-label map
    """
    low = [v for v in base.vertices if base.degree(v) < 2]
    if low:
        raise ConditionViolation("C1", f"vertices {low} have degree < 2", witness=low)

    edges = directed_edges(base)
    index = {(e.tail, e.head): i for i, e in enumerate(edges)}
    graph = base.to_networkx()
    children = [
        [index[(e.head, w)] for w in sorted(graph.neighbors(e.head)) if w != e.tail] for e in edges
    ]
    reverse = [index[(e.head, e.tail)] for e in edges]

    classes = _relabel([(e.length, e.potential, base.coupling(e.head)) for e in edges])
    while True:
        keys = [
            (classes[i], tuple(sorted(classes[c] for c in children[i])), classes[reverse[i]])
            for i in range(len(edges))
        ]
        refined = _relabel(keys)
        if len(set(refined)) == len(set(classes)):
            classes = refined
            break
        classes = refined

    m = len(set(classes))
    representative = [classes.index(j) for j in range(m)]
    matrix = [[0] * m for _ in range(m)]
    for j, rep in enumerate(representative):
        for c in children[rep]:
            matrix[j][classes[c]] += 1

    if root_edge is None:
        root_index = 0
    elif root_edge in index:
        root_index = index[root_edge]
    else:
        raise ValueError(f"root edge {root_edge} is not an edge of the base graph")
    root = edges[root_index]

    logger.info(f"Universal cover of {len(base.vertices)}-vertex base: {2 * len(base.edges)} directed edges, {m} labels")
    return ConeSystem(
        matrix=matrix,
        lengths=[edges[rep].length for rep in representative],
        potentials=[edges[rep].potential for rep in representative],
        couplings=[base.coupling(edges[rep].head) for rep in representative],
        root_label=classes[root_index],
        root_length=root.length,
        root_potential=root.potential,
        reverse=[classes[reverse[rep]] for rep in representative],
    )


class ConditionResult(BaseModel):
    """Outcome of one structural condition."""

    name: str
    passed: bool
    witness: Optional[list[int]] = None
    detail: str = ""


class ConditionReport(BaseModel):
    """C0, C1* and C2 results; witnesses use 1-based labels."""

    c0: ConditionResult
    c1_star: ConditionResult
    c2: ConditionResult
    c2_choices: list[Optional[int]] = Field(default_factory=list)
    backward_finite: bool = False

    @property
    def all_passed(self) -> bool:
        return self.c0.passed and self.c1_star.passed and self.c2.passed

    def failures(self) -> list[ConditionResult]:
        return [r for r in (self.c0, self.c1_star, self.c2) if not r.passed]


def label_digraph(system: ConeSystem) -> nx.DiGraph:
    """Directed graph with an arc j -> k whenever M[j][k] >= 1."""
    graph = nx.DiGraph()
    graph.add_nodes_from(range(system.size))
    for j, row in enumerate(system.matrix):
        graph.add_edges_from((j, k) for k, count in enumerate(row) if count >= 1)
    return graph


def dominating_child(system: ConeSystem, label: int) -> Optional[int]:
    """A child label k' whose children cover every child label of ``label``, if any."""
    M = system.matrix_array()
    support = M[label] >= 1
    for candidate in np.nonzero(support)[0]:
        if np.all(M[candidate][support] >= 1):
            return int(candidate)
    return None


def check_conditions(system: ConeSystem) -> ConditionReport:
    """Report on C0 (row sums >= 2), C1* (irreducibility of M) and C2 (dominating child)."""
    rows = system.row_sums()
    bad_rows = [int(j) for j in np.nonzero(rows < 2)[0]]
    c0 = ConditionResult(
        name="C0",
        passed=not bad_rows,
        witness=[bad_rows[0] + 1] if bad_rows else None,
        detail=f"row {bad_rows[0] + 1} has {rows[bad_rows[0]]} children" if bad_rows else "",
    )

    graph = label_digraph(system)
    c1_star = ConditionResult(name="C1*", passed=True)
    for k in range(system.size):
        reach = nx.descendants(graph, k) | {k}
        missing = [l for l in range(system.size) if l not in reach]
        if missing:
            c1_star = ConditionResult(
                name="C1*",
                passed=False,
                witness=[k + 1, missing[0] + 1],
                detail=f"label {missing[0] + 1} unreachable from label {k + 1}",
            )
            break

    choices = [dominating_child(system, j) for j in range(system.size)]
    failing = [j for j, choice in enumerate(choices) if choice is None]
    c2 = ConditionResult(
        name="C2",
        passed=not failing,
        witness=[failing[0] + 1] if failing else None,
        detail=f"no dominating child for label {failing[0] + 1}" if failing else "",
    )
    report = ConditionReport(
        c0=c0,
        c1_star=c1_star,
        c2=c2,
        c2_choices=choices,
        backward_finite=system.reverse is not None,
    )
    for failure in report.failures():
        logger.warning(f"{failure.name} fails: {failure.detail}")
    return report


def require_conditions(system: ConeSystem, names: tuple[str, ...] = ("C1*",)) -> ConditionReport:
    """Raise ConditionViolation for the first failing condition among ``names``."""
    report = check_conditions(system)
    for result in report.failures():
        if result.name in names:
            raise ConditionViolation(result.name, result.detail, witness=result.witness)
    return report


def is_hamiltonian(graph: nx.Graph, max_vertices: int = 10) -> Optional[bool]:
    """Brute-force Hamiltonian cycle test; None when the graph is too large to enumerate."""
    nodes = list(graph.nodes())
    n = len(nodes)
    if n > max_vertices:
        return None
    if n < 3:
        return False
    first, rest = nodes[0], nodes[1:]
    for perm in itertools.permutations(rest):
        if perm[0] > perm[-1]:
            continue
        cycle = (first, *perm, first)
        if all(graph.has_edge(a, b) for a, b in zip(cycle, cycle[1:])):
            return True
    return False

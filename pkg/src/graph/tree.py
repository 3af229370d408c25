"""Finite truncations of trees of finite cone type and orientation views of finite trees.

Node 0 of a TruncatedQuantumTree is the vertex t_{b_o}; its incoming edge is
the root edge b_o, whose origin o_{b_o} is the sentinel ORIGIN. Nodes are
stored in breadth-first order, so every level and every sibling group is a
contiguous slice.
"""

import logging
from dataclasses import dataclass, field, replace
from typing import Literal, Optional

import networkx as nx
import numpy as np

from src.common.errors import TreeSizeError
from src.common.models import ConeSystem, PotentialSpec
from src.common.settings import DEFAULT

logger = logging.getLogger(__name__)

ORIGIN = -1
MIDPOINT = "o"


@dataclass(frozen=True, eq=False)
class TruncatedQuantumTree:
    """Explicit rooted tree in the twisted view, arrays indexed by node.

    ``length``, ``potential_id`` and ``label`` describe the incoming edge of a
    node; ``alpha`` is the coupling at the node itself.
    """

    parent: np.ndarray
    label: np.ndarray
    rank: np.ndarray
    depth: np.ndarray
    length: np.ndarray
    alpha: np.ndarray
    potential_id: np.ndarray
    potentials: tuple[PotentialSpec, ...]
    child_start: np.ndarray
    child_count: np.ndarray
    level_start: np.ndarray
    system: ConeSystem
    origin_alpha: float = 0.0
    _path_keys: dict = field(default_factory=dict, compare=False, repr=False)

    @property
    def size(self) -> int:
        return len(self.parent)

    @property
    def max_depth(self) -> int:
        return len(self.level_start) - 2

    def level(self, d: int) -> slice:
        return slice(int(self.level_start[d]), int(self.level_start[d + 1]))

    @property
    def leaves(self) -> np.ndarray:
        """Truncation leaves: every node on the deepest level."""
        return np.arange(*self.level(self.max_depth).indices(self.size))

    def children(self, node: int) -> np.ndarray:
        start = int(self.child_start[node])
        return np.arange(start, start + int(self.child_count[node]))

    def neighbours(self, node: int) -> list[int]:
        """Tree neighbours of a node, ORIGIN included for node 0."""
        if node == ORIGIN:
            return [0]
        return [int(self.parent[node])] + [int(c) for c in self.children(node)]

    def path_to_root(self, node: int) -> list[int]:
        """Nodes from ``node`` up to node 0, then ORIGIN."""
        path = [node]
        while node != ORIGIN:
            node = int(self.parent[node])
            path.append(node)
        return path

    def with_parameters(self, length: np.ndarray, alpha: np.ndarray, origin_alpha: Optional[float] = None) -> "TruncatedQuantumTree":
        """Same combinatorics, new edge lengths and couplings."""
        if length.shape != self.length.shape or alpha.shape != self.alpha.shape:
            raise ValueError("parameter arrays must match the tree size")
        return replace(
            self,
            length=length,
            alpha=alpha,
            origin_alpha=self.origin_alpha if origin_alpha is None else origin_alpha,
            _path_keys=self._path_keys,
        )

    def backward_label(self) -> Optional[int]:
        return self.system.backward_label(self.system.root_label)

    def to_networkx(self) -> nx.Graph:
        """Undirected copy with ORIGIN as an explicit node."""
        graph = nx.Graph()
        graph.add_node(ORIGIN, alpha=self.origin_alpha)
        for node in range(self.size):
            graph.add_node(node, alpha=float(self.alpha[node]), label=int(self.label[node]))
            graph.add_edge(
                int(self.parent[node]),
                node,
                length=float(self.length[node]),
                potential=self.potentials[int(self.potential_id[node])],
                tail=int(self.parent[node]),
            )
        return graph


def level_counts(system: ConeSystem, depth: int) -> list[int]:
    """Number of vertices at each depth 0..depth below t_{b_o}."""
    M = system.matrix_array()
    by_label = np.zeros(system.size, dtype=object)
    by_label[system.root_label] = 1
    counts = [1]
    for _ in range(depth):
        by_label = by_label @ M.astype(object)
        counts.append(int(by_label.sum()))
    return counts


def expand_truncated_tree(
    system: ConeSystem,
    depth: int,
    max_vertices: Optional[int] = None,
) -> TruncatedQuantumTree:
    """Materialise the forward cone of b_o down to ``depth`` levels below t_{b_o}.

    Args:
        system: Cone system providing labels, child matrix and edge data
        depth: Number of generations below t_{b_o} (>= 1)
        max_vertices: Size cap; defaults to QTREE_MAX_VERTICES

    Returns:
        TruncatedQuantumTree in breadth-first order
    """
    if depth < 1:
        raise ValueError(f"depth must be >= 1, got {depth}")
    cap = DEFAULT.max_vertices if max_vertices is None else max_vertices
    counts = level_counts(system, depth)
    total = sum(counts)
    if total > cap:
        raise TreeSizeError(total, cap)

    M = system.matrix_array()
    rows = M.sum(axis=1)
    templates = [np.repeat(np.arange(system.size), M[j]) for j in range(system.size)]
    template_flat = np.concatenate(templates) if rows.sum() else np.empty(0, dtype=np.int64)
    template_start = np.concatenate([[0], np.cumsum(rows)[:-1]])

    labels = [np.array([system.root_label])]
    parents = [np.array([ORIGIN])]
    ranks = [np.array([0])]
    level_start = [0, 1]
    offset = 0
    for _ in range(depth):
        current = labels[-1]
        nodes = np.arange(offset, offset + len(current))
        per_node = rows[current]
        n_children = int(per_node.sum())
        first = np.repeat(np.cumsum(per_node) - per_node, per_node)
        intra = np.arange(n_children) - first
        child_labels = template_flat[np.repeat(template_start[current], per_node) + intra]
        labels.append(child_labels)
        parents.append(np.repeat(nodes, per_node))
        ranks.append(intra)
        offset += len(current)
        level_start.append(level_start[-1] + n_children)

    label = np.concatenate(labels).astype(np.int64)
    parent = np.concatenate(parents).astype(np.int64)
    rank = np.concatenate(ranks).astype(np.int64)
    depth_arr = np.repeat(np.arange(depth + 1), np.diff(level_start))

    potentials = tuple(system.potentials)
    potential_id = label.copy()
    length = np.asarray(system.lengths, dtype=float)[label]
    if system.root_potential is not None and system.root_potential != system.potentials[system.root_label]:
        potentials = potentials + (system.root_potential,)
        potential_id[0] = len(potentials) - 1
    length[0] = system.edge_length_of_root
    alpha = np.asarray(system.couplings, dtype=float)[label]

    child_count = np.zeros(len(label), dtype=np.int64)
    np.add.at(child_count, parent[1:], 1)
    child_start = np.zeros(len(label), dtype=np.int64)
    if len(label) > 1:
        first_child = np.searchsorted(parent[1:], np.arange(len(label)), side="left") + 1
        child_start = np.where(child_count > 0, first_child, 0)

    back = system.backward_label(system.root_label)
    origin_alpha = float(system.couplings[back]) if back is not None else float(system.couplings[system.root_label])

    logger.debug(f"Expanded tree: depth={depth}, vertices={len(label)}")
    return TruncatedQuantumTree(
        parent=parent,
        label=label,
        rank=rank,
        depth=depth_arr,
        length=length,
        alpha=alpha,
        potential_id=potential_id,
        potentials=potentials,
        child_start=child_start,
        child_count=child_count,
        level_start=np.asarray(level_start, dtype=np.int64),
        system=system,
        origin_alpha=origin_alpha,
    )


Side = Literal[1, -1]


@dataclass(frozen=True)
class OrientedTree:
    """Coherent and twisted orientations of a finite tree around a root edge b_o = (o_b, t_b).

    Coherent view: on the + side (containing t_b) ``coherent_parent[v]`` is the
    neighbour closer to t_b; on the - side ``coherent_child[v]`` is the
    neighbour closer to o_b. Twisted view: every vertex descends from the
    midpoint of b_o, so o_b and t_b both have parent MIDPOINT.
    """

    root_edge: tuple[int, int]
    side: dict[int, Side]
    coherent_parent: dict[int, Optional[int]]
    coherent_child: dict[int, Optional[int]]
    twisted_parent: dict[int, object]
    twisted_children: dict[object, list[int]]
    label: dict[int, int]

    def edge_of_vertex(self, v: int) -> tuple:
        """e(b(v)): the edge joining v to its twisted parent; halves of b_o carry the side."""
        parent = self.twisted_parent[v]
        if parent == MIDPOINT:
            return ("root", self.side[v])
        return tuple(sorted((v, parent)))

    def forward_neighbours(self, v: int) -> list[int]:
        """N_v^+ for + side vertices, N_v^- for - side vertices (both are twisted children)."""
        return list(self.twisted_children.get(v, []))


def _cone_labels(graph: nx.Graph, parent: dict, children: dict) -> dict[int, int]:
    """Label each vertex by the isomorphism class of the forward cone below it."""
    order = list(nx.topological_sort(nx.DiGraph([(p, c) for c, p in parent.items() if p != MIDPOINT])))
    order = [v for v in graph.nodes if v not in order] + order
    classes: dict = {}
    label: dict[int, int] = {}
    for v in reversed(order):
        p = parent[v]
        if p == MIDPOINT:
            edge_key = ("root",)
        else:
            data = graph.edges[p, v]
            potential = data.get("potential", PotentialSpec())
            if data.get("tail", p) != p:
                potential = potential.reversed()
            edge_key = (data.get("length"), potential)
        key = (edge_key, graph.nodes[v].get("alpha", 0.0), tuple(sorted(label[c] for c in children.get(v, []))))
        label[v] = classes.setdefault(key, len(classes))
    return label


def orient_tree(graph: nx.Graph, root_edge: tuple[int, int]) -> OrientedTree:
    """Build both orientation views of a finite tree around the directed root edge."""
    if not nx.is_tree(graph):
        raise ValueError("orient_tree expects a tree")
    o, t = root_edge
    if not graph.has_edge(o, t):
        raise ValueError(f"root edge {root_edge} is not an edge of the tree")
    cut = graph.copy()
    cut.remove_edge(o, t)
    plus = nx.node_connected_component(cut, t)
    side: dict[int, Side] = {v: (1 if v in plus else -1) for v in graph.nodes}

    twisted_parent: dict[int, object] = {o: MIDPOINT, t: MIDPOINT}
    for anchor in (o, t):
        for a, b in nx.bfs_edges(cut, anchor):
            twisted_parent[b] = a
    twisted_children: dict[object, list[int]] = {}
    for v, p in twisted_parent.items():
        twisted_children.setdefault(p, []).append(v)

    coherent_parent = {v: (twisted_parent[v] if side[v] == 1 and v != t else None) for v in graph.nodes}
    coherent_parent[t] = o
    coherent_child = {v: (twisted_parent[v] if side[v] == -1 and v != o else None) for v in graph.nodes}
    coherent_child[o] = t

    return OrientedTree(
        root_edge=root_edge,
        side=side,
        coherent_parent=coherent_parent,
        coherent_child=coherent_child,
        twisted_parent=twisted_parent,
        twisted_children=twisted_children,
        label=_cone_labels(graph, twisted_parent, twisted_children),
    )

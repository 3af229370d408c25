"""Brute-force resolvent of a truncated tree from a sparse discretisation of every edge.

Each edge is cut into equal cells no longer than ``step``. The matrix is the
three-point second difference on every edge, with the vertex rows summing
the one-sided fluxes of all incident edges plus alpha times the vertex value
(linear elements with a lumped mass). It is symmetric; the lumped mass
carries the cell lengths.
"""

import logging
from dataclasses import dataclass
from typing import Literal, Optional, Sequence

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import eigsh, splu

from src.edge.solutions import ComplexEnergy, EnergyLike
from src.graph.tree import ORIGIN, TruncatedQuantumTree
from src.green.kernel import EdgePoint

logger = logging.getLogger(__name__)

MIN_CELLS = 32

EndCondition = Literal["dirichlet", "neumann"]


@dataclass(frozen=True)
class DiscretizedOperator:
    """Stiffness K (second differences, couplings, potential) and lumped mass on a tree grid.

    ``vertex_dof[v]`` is the unknown at the terminus of node v's edge and
    ``origin_dof`` the one at the origin of the root edge; -1 marks a
    vertex removed by a Dirichlet condition. ``edge_dofs[v]`` lists the
    unknowns along node v's edge from origin to terminus, ends included.
    """

    stiffness: sp.csc_matrix
    mass: np.ndarray
    step: float
    vertex_dof: np.ndarray
    origin_dof: int
    edge_dofs: tuple[np.ndarray, ...]
    cells: np.ndarray
    lengths: np.ndarray
    boundary: EndCondition

    @property
    def size(self) -> int:
        return len(self.mass)

    def dof_at(self, point: EdgePoint) -> int:
        """Grid unknown at an edge point; the point must sit on the grid."""
        dofs = self.edge_dofs[point.node]
        cells = int(self.cells[point.node])
        length = self.cell_length(point.node) * cells
        position = point.x / length * cells
        index = int(round(position))
        if abs(position - index) > 1e-9 or dofs[index] < 0:
            raise ValueError(f"{point} is not an interior grid point at step {self.step:g}")
        return int(dofs[index])

    def cell_length(self, node: int) -> float:
        return float(self.lengths[node]) / int(self.cells[node])


def discretize_tree(
    tree: TruncatedQuantumTree,
    step: float,
    boundary: EndCondition = "dirichlet",
) -> DiscretizedOperator:
    """Assemble the operator; ``boundary`` applies at the origin and at every truncation leaf."""
    if not step > 0:
        raise ValueError("step must be positive")
    n = tree.size
    leaves = np.zeros(n, dtype=bool)
    leaves[tree.leaves] = True
    removed = leaves if boundary == "dirichlet" else np.zeros(n, dtype=bool)

    counter = 0
    origin_dof = -1 if boundary == "dirichlet" else 0
    if origin_dof == 0:
        counter = 1
    vertex_dof = np.full(n, -1, dtype=np.int64)
    keep = np.nonzero(~removed)[0]
    vertex_dof[keep] = counter + np.arange(len(keep))
    counter += len(keep)

    cells = np.maximum(1, np.ceil(tree.length / step - 1e-12)).astype(np.int64)
    rows, cols, vals = [], [], []
    diag = {}
    mass = {}

    def add_diag(dof: int, k_value: float, m_value: float) -> None:
        if dof < 0:
            return
        diag[dof] = diag.get(dof, 0.0) + k_value
        mass[dof] = mass.get(dof, 0.0) + m_value

    edge_dofs = []
    for v in range(n):
        m = int(cells[v])
        h = float(tree.length[v]) / m
        parent = int(tree.parent[v])
        start = origin_dof if parent == ORIGIN else int(vertex_dof[parent])
        interior = counter + np.arange(m - 1)
        counter += m - 1
        chain = np.concatenate([[start], interior, [vertex_dof[v]]]).astype(np.int64)
        edge_dofs.append(chain)

        xs = np.linspace(0.0, float(tree.length[v]), m + 1)
        potential = tree.potentials[int(tree.potential_id[v])].evaluate(xs, float(tree.length[v]))
        weights = np.full(m + 1, h)
        weights[0] = weights[-1] = 0.5 * h
        for dof, w, pot in zip(chain, weights, potential):
            add_diag(int(dof), 0.0, w)
            add_diag(int(dof), w * pot, 0.0)
        for a, b in zip(chain[:-1], chain[1:]):
            add_diag(int(a), 1.0 / h, 0.0)
            add_diag(int(b), 1.0 / h, 0.0)
            if a >= 0 and b >= 0:
                rows.extend([a, b])
                cols.extend([b, a])
                vals.extend([-1.0 / h, -1.0 / h])

    for v in keep:
        add_diag(int(vertex_dof[v]), float(tree.alpha[v]), 0.0)
    if origin_dof >= 0:
        add_diag(origin_dof, float(tree.origin_alpha), 0.0)

    size = counter
    diag_index = np.fromiter(diag.keys(), dtype=np.int64)
    rows.extend(diag_index)
    cols.extend(diag_index)
    vals.extend(diag[d] for d in diag_index)
    stiffness = sp.csc_matrix((vals, (rows, cols)), shape=(size, size))
    mass_vec = np.zeros(size)
    for dof, value in mass.items():
        mass_vec[dof] = value

    op = DiscretizedOperator(
        stiffness=stiffness,
        mass=mass_vec,
        step=step,
        vertex_dof=vertex_dof,
        origin_dof=origin_dof,
        edge_dofs=tuple(edge_dofs),
        cells=cells,
        lengths=np.asarray(tree.length, dtype=float),
        boundary=boundary,
    )
    logger.debug(f"Discretised tree: {size} unknowns at step {step:g}")
    return op


def _solve(op: DiscretizedOperator, z: complex, columns: Sequence[int]) -> np.ndarray:
    """Columns of (K - z M)^-1 for unit point loads."""
    system = (op.stiffness - z * sp.diags(op.mass)).tocsc().astype(complex)
    try:
        lu = splu(system)
    except RuntimeError as exc:
        raise RuntimeError(f"sparse factorisation failed at z={z}: {exc}") from exc
    rhs = np.zeros((op.size, len(columns)), dtype=complex)
    rhs[np.asarray(columns), np.arange(len(columns))] = 1.0
    return lu.solve(rhs)


@dataclass(frozen=True)
class OracleGreen:
    """Diagonal Green values at the requested vertices; ``values`` is extrapolated when two steps were used."""

    vertices: np.ndarray
    values: np.ndarray
    coarse: np.ndarray
    fine: Optional[np.ndarray]
    step: float

    @property
    def refinement_gap(self) -> float:
        if self.fine is None:
            return float("nan")
        return float(np.max(np.abs(self.fine - self.coarse)))


def default_step(tree: TruncatedQuantumTree) -> float:
    return float(np.min(tree.length)) / MIN_CELLS


def _vertex_values(tree: TruncatedQuantumTree, z: complex, step: float, vertices: np.ndarray, boundary: EndCondition) -> np.ndarray:
    op = discretize_tree(tree, step, boundary)
    dofs = op.vertex_dof[vertices]
    if np.any(dofs < 0):
        raise ValueError("Green values requested at a vertex removed by the Dirichlet condition")
    solution = _solve(op, z, dofs)
    return solution[dofs, np.arange(len(dofs))]


def oracle_green(
    tree: TruncatedQuantumTree,
    z: EnergyLike,
    step: Optional[float] = None,
    vertices: Optional[Sequence[int]] = None,
    boundary: EndCondition = "dirichlet",
    extrapolate: bool = True,
) -> OracleGreen:
    """G(v, v) from the discretised operator, Richardson-extrapolated over step and step/2.

    Args:
        tree: Truncated tree; its leaves and the root-edge origin get ``boundary``
        z: Energy with Im z > 0
        step: Grid step; defaults to the shortest edge over 32 and must not exceed it
        vertices: Nodes to probe; defaults to every node not removed by the boundary
        boundary: End condition at the origin and the leaves
        extrapolate: Combine the two grids as (4 G_{h/2} - G_h)/3

    Returns:
        OracleGreen with per-vertex values
    """
    energy = ComplexEnergy.of(z)
    if energy.eta <= 0:
        raise ValueError("the discrete resolvent needs Im z > 0")
    shortest = float(np.min(tree.length))
    step = default_step(tree) if step is None else step
    if step > shortest / MIN_CELLS * (1 + 1e-12):
        raise ValueError(f"step {step:g} resolves the shortest edge with fewer than {MIN_CELLS} cells")
    if vertices is None:
        leaves = set(int(v) for v in tree.leaves) if boundary == "dirichlet" else set()
        vertices = [v for v in range(tree.size) if v not in leaves]
    vertices = np.asarray(vertices, dtype=np.int64)

    coarse = _vertex_values(tree, energy.z, step, vertices, boundary)
    fine = _vertex_values(tree, energy.z, step / 2, vertices, boundary) if extrapolate else None
    values = (4 * fine - coarse) / 3 if fine is not None else coarse
    result = OracleGreen(vertices=vertices, values=values, coarse=coarse, fine=fine, step=step)
    logger.debug(f"Oracle Green at z={energy}: {len(vertices)} vertices, refinement gap {result.refinement_gap:.2e}")
    return result


def oracle_kernel(
    tree: TruncatedQuantumTree,
    z: EnergyLike,
    p: EdgePoint,
    q: EdgePoint,
    step: Optional[float] = None,
    boundary: EndCondition = "dirichlet",
) -> complex:
    """G(x, y) at two grid points, extrapolated over step and step/2."""
    energy = ComplexEnergy.of(z)
    if energy.eta <= 0:
        raise ValueError("the discrete resolvent needs Im z > 0")
    step = default_step(tree) if step is None else step
    values = []
    for h in (step, step / 2):
        op = discretize_tree(tree, h, boundary)
        column = _solve(op, energy.z, [op.dof_at(q)])[:, 0]
        values.append(column[op.dof_at(p)])
    return complex((4 * values[1] - values[0]) / 3)


def spectral_bottom_estimate(tree: TruncatedQuantumTree, step: Optional[float] = None) -> float:
    """Smallest eigenvalue of the discretised tree with Dirichlet ends (shift-invert Lanczos).

    Dirichlet conditions raise eigenvalues, so this approximates the bottom
    of the infinite tree's spectrum from above as the depth grows.
    """
    step = default_step(tree) if step is None else step
    op = discretize_tree(tree, step, "dirichlet")
    if op.size == 0:
        raise ValueError("tree has no interior unknowns")
    floor = min(p.min_value() for p in tree.potentials)
    negative = max(0.0, -float(np.min(tree.alpha)))
    sigma = floor - 1.0 - 4.0 * negative**2
    if op.size < 3:
        dense = op.stiffness.toarray() / np.sqrt(np.outer(op.mass, op.mass))
        return float(np.linalg.eigvalsh(dense)[0])
    values = eigsh(op.stiffness, k=1, M=sp.diags(op.mass).tocsc(), sigma=sigma, which="LM", return_eigenvectors=False)
    return float(np.min(values))

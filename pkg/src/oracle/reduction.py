"""Vertex reduction of a finite quantum graph at a real energy.

Away from the Dirichlet spectrum an eigenfunction is fixed by its vertex
values psi, which satisfy (A_lam psi)(v) = W_lam(v) psi(v) with

    (A_lam psi)(v) = sum_{u ~ v} psi(u)/S_lam(L_uv)
    W_lam(v)       = alpha_v + sum_{u ~ v} C_lam(L_uv)/S_lam(L_uv),

where C and S are taken along the edge oriented away from v.
"""

import logging
from typing import Optional

import numpy as np
from pydantic import BaseModel, ConfigDict
from scipy.optimize import brentq

from src.common.errors import DirichletProximityError
from src.common.models import QuantumGraphSpec
from src.common.settings import DEFAULT
from src.edge.solutions import (
    dirichlet_distance,
    dirichlet_spectrum,
    monodromy_batch,
    nearest_dirichlet,
)

logger = logging.getLogger(__name__)


class ReductionResult(BaseModel):
    """A_lam, the diagonal W_lam and the smallest singular value of A_lam - W_lam."""

    model_config = ConfigDict(arbitrary_types_allowed=True)

    lam: float
    vertices: list[int]
    adjacency: np.ndarray
    potential: np.ndarray
    residual: float

    @property
    def matrix(self) -> np.ndarray:
        return self.adjacency - np.diag(self.potential)


def _graph_spectrum(graph: QuantumGraphSpec, lam_max: float):
    return dirichlet_spectrum(
        [e.length for e in graph.edges],
        lam_max,
        potentials=[e.potential for e in graph.edges],
    )


def guard_reduction(graph: QuantumGraphSpec, lam: float, guard: Optional[float] = None) -> None:
    """Raise DirichletProximityError if lam is within ``guard`` of any edge's Dirichlet value."""
    guard = DEFAULT.dirichlet_guard if guard is None else guard
    distance = min(dirichlet_distance(e.potential, e.length, lam) for e in graph.edges)
    if distance < guard:
        nearest = nearest_dirichlet(_graph_spectrum(graph, lam + 1.0).merged, lam)
        raise DirichletProximityError(lam, lam if nearest is None else nearest, guard)


def _reduction_matrices(graph: QuantumGraphSpec, lam: float) -> tuple[list[int], np.ndarray, np.ndarray]:
    potentials = []
    for edge in graph.edges:
        potentials.extend([edge.potential, edge.potential.reversed()])
    lengths = np.repeat([e.length for e in graph.edges], 2)
    edge = monodromy_batch(potentials, np.arange(len(potentials)), lengths, complex(lam, 0.0))
    index = {v: i for i, v in enumerate(graph.vertices)}
    n = len(graph.vertices)
    adjacency = np.zeros((n, n))
    diagonal = np.array([graph.coupling(v) for v in graph.vertices], dtype=float)
    for k, e in enumerate(graph.edges):
        forward, backward = 2 * k, 2 * k + 1
        s = edge.S[forward].real
        u, v = index[e.u], index[e.v]
        adjacency[u, v] += 1.0 / s
        adjacency[v, u] += 1.0 / s
        diagonal[u] += edge.C[forward].real / s
        diagonal[v] += edge.C[backward].real / edge.S[backward].real
    return list(graph.vertices), adjacency, diagonal


def discrete_reduction(graph: QuantumGraphSpec, lam: float, guard: Optional[float] = None) -> ReductionResult:
    """Reduced matrices at lam; a vanishing residual marks a quantum-graph eigenvalue."""
    guard_reduction(graph, lam, guard)
    vertices, adjacency, diagonal = _reduction_matrices(graph, lam)
    singular = np.linalg.svd(adjacency - np.diag(diagonal), compute_uv=False)
    return ReductionResult(
        lam=float(lam),
        vertices=vertices,
        adjacency=adjacency,
        potential=diagonal,
        residual=float(singular[-1]),
    )


class ReductionZero(BaseModel):
    lam: float
    multiplicity: int


def _eigen(graph: QuantumGraphSpec, lam: float) -> np.ndarray:
    _, adjacency, diagonal = _reduction_matrices(graph, lam)
    return np.linalg.eigvalsh(adjacency - np.diag(diagonal))


def reduction_zeros(
    graph: QuantumGraphSpec,
    lam_min: float,
    lam_max: float,
    points_per_segment: int = 200,
    guard: Optional[float] = None,
    xtol: float = 1e-13,
) -> list[ReductionZero]:
    """Energies in (lam_min, lam_max) where an eigenvalue of A_lam - W_lam crosses zero.

    Eigenvalue branches are continuous between consecutive Dirichlet values,
    so each sorted branch is scanned for sign changes and refined with brentq.
    Crossings closer than 1e-9 merge into one zero with multiplicity.
    """
    if not lam_min < lam_max:
        raise ValueError("lam_min must be below lam_max")
    guard = DEFAULT.dirichlet_guard if guard is None else guard
    poles = _graph_spectrum(graph, lam_max + 1.0).merged
    poles = poles[(poles > lam_min) & (poles < lam_max)]
    cuts = np.concatenate([[lam_min], poles, [lam_max]])

    roots: list[float] = []
    for a, b in zip(cuts[:-1], cuts[1:]):
        lo, hi = a + (guard if a in poles else 0.0), b - (guard if b in poles else 0.0)
        if lo >= hi:
            continue
        grid = np.linspace(lo, hi, points_per_segment)
        values = np.array([_eigen(graph, lam) for lam in grid])
        for branch in range(values.shape[1]):
            series = values[:, branch]
            for i in np.nonzero(np.sign(series[:-1]) * np.sign(series[1:]) < 0)[0]:
                roots.append(brentq(lambda lam: _eigen(graph, lam)[branch], grid[i], grid[i + 1], xtol=xtol))
            roots.extend(float(grid[i]) for i in np.nonzero(series == 0)[0])

    roots.sort()
    zeros: list[ReductionZero] = []
    for root in roots:
        if zeros and abs(root - zeros[-1].lam) < 1e-9 * max(1.0, abs(root)):
            zeros[-1] = ReductionZero(lam=zeros[-1].lam, multiplicity=zeros[-1].multiplicity + 1)
        else:
            zeros.append(ReductionZero(lam=float(root), multiplicity=1))
    logger.info(f"Reduction on [{lam_min:g}, {lam_max:g}]: {len(zeros)} zeros between {len(poles)} Dirichlet values")
    return zeros

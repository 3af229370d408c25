"""Weyl-Titchmarsh functions, multipliers and vertex Green functions on truncated trees.

Values are stored per tree node v and refer to the node's incoming edge
b = (parent(v), v):

    r_plus_origin[v]    R+(o_b)   forward, looking into b from its origin
    r_plus_terminus[v]  R+(t_b)   forward, at the terminus of b
    r_minus_origin[v]   R-(o_b)   backward, at o_b with the cone of b removed
    r_minus_terminus[v] R-(t_b)   backward, looking back along b from t_b
    zeta[v], zeta_hat[v]          multipliers of b and of its reversal
"""

import json
import logging
from dataclasses import dataclass
from typing import Literal, Optional, Sequence

import numpy as np
from pydantic import BaseModel, ConfigDict
from scipy.integrate import trapezoid

from src.common.errors import BacktrackingPathError, HerglotzViolation
from src.common.hyperbolic import mobius
from src.common.models import ConeSystem
from src.cone.solver import limit_on_axis, solve_cone_system
from src.edge.solutions import (
    ComplexEnergy,
    EdgeSolutionMatrix,
    EnergyLike,
    guard_real_energy,
    monodromy_batch,
)
from src.graph.tree import ORIGIN, TruncatedQuantumTree, expand_truncated_tree

logger = logging.getLogger(__name__)

POLE_TOLERANCE = 1e-12

BoundaryKind = Literal["free", "dirichlet", "neumann", "cone"]


@dataclass(frozen=True)
class BoundaryRule:
    """Seed for R+ at truncation leaves and for R- at the origin of the root edge.

    ``values`` holds the unperturbed R+ at the origin of each label edge and
    is required for the ``cone`` rule.
    """

    kind: BoundaryKind = "free"
    values: Optional[np.ndarray] = None

    def __post_init__(self):
        if self.kind == "cone" and self.values is None:
            raise ValueError("the cone boundary rule needs per-label R+ values")

    @classmethod
    def cone(cls, system: ConeSystem, z: EnergyLike) -> "BoundaryRule":
        """Exact values from the cone system; continued to the axis when Im z = 0."""
        energy = ComplexEnergy.of(z)
        if energy.eta > 0:
            values = solve_cone_system(system, energy).r_plus
        else:
            limit = limit_on_axis(system, energy.lam)
            if not limit.converged:
                logger.warning(f"Cone boundary at lam={energy.lam:g} built from a non-converged axis limit")
            values = limit.r_plus
        return cls(kind="cone", values=np.asarray(values, dtype=complex))

    def _terminus_value(self, system: ConeSystem, label, alpha, sqrt_z: complex):
        label = np.asarray(label)
        if self.kind == "free":
            return system.row_sums()[label] * 1j * sqrt_z - alpha
        if self.kind == "dirichlet":
            return np.full(label.shape, complex(np.inf, 0.0))
        if self.kind == "neumann":
            return np.zeros(label.shape, dtype=complex)
        return (system.matrix_array() @ self.values)[label] - alpha

    def leaf_terminus(self, tree: TruncatedQuantumTree, leaves: np.ndarray, sqrt_z: complex) -> np.ndarray:
        """R+(t) at truncation leaves."""
        return self._terminus_value(tree.system, tree.label[leaves], tree.alpha[leaves], sqrt_z)

    def origin_seed(self, tree: TruncatedQuantumTree, sqrt_z: complex) -> complex:
        """R-(o_{b_o}): the forward value at the terminus of the reversed root edge."""
        back = tree.backward_label()
        if back is None:
            logger.warning("No reverse label for the root edge; seeding R- at the origin from the root label")
            back = tree.system.root_label
        return complex(self._terminus_value(tree.system, back, tree.origin_alpha, sqrt_z))


@dataclass(frozen=True)
class GreenValue:
    """Diagonal Green function at one vertex; ``pole`` marks a vanishing R+ + R-."""

    vertex: int
    value: complex
    pole: bool = False


def tree_monodromy(tree: TruncatedQuantumTree, z: EnergyLike) -> EdgeSolutionMatrix:
    return monodromy_batch(tree.potentials, tree.potential_id, tree.length, z)


def _pull_back(edge: EdgeSolutionMatrix, r_terminus):
    """R+(o) from R+(t): (C' - C R)/(R S - S')."""
    return mobius(-edge.C, edge.Cp, edge.S, -edge.Sp, r_terminus)


def _push_forward_backward(edge: EdgeSolutionMatrix, r_origin):
    """R-(t) from R-(o): (S' r - C')/(C - S r)."""
    return mobius(edge.Sp, -edge.Cp, -edge.S, edge.C, r_origin)


def _safe_green(denominator):
    denominator = np.asarray(denominator, dtype=complex)
    infinite = ~np.isfinite(denominator)
    with np.errstate(divide="ignore", invalid="ignore"):
        return np.where(infinite, 0.0, -1.0 / np.where(infinite, 1.0, denominator))


class WTStateRecord(BaseModel):
    """JSON form of a WTState; complex values as [re, im] pairs."""

    model_config = ConfigDict(ser_json_inf_nan="constants")

    system: ConeSystem
    depth: int
    length: list[float]
    alpha: list[float]
    origin_alpha: float
    lam: float
    eta: float
    boundary: BoundaryKind
    boundary_values: Optional[list[tuple[float, float]]] = None
    r_plus_origin: list[tuple[float, float]]
    r_plus_terminus: list[tuple[float, float]]
    r_minus_origin: list[tuple[float, float]]
    r_minus_terminus: list[tuple[float, float]]
    zeta: list[tuple[float, float]]
    zeta_hat: list[tuple[float, float]]


def _pairs(values) -> list[tuple[float, float]]:
    return [(float(v.real), float(v.imag)) for v in np.asarray(values, dtype=complex)]


def _unpairs(pairs) -> np.ndarray:
    arr = np.asarray(pairs, dtype=float).reshape(-1, 2)
    return arr[:, 0] + 1j * arr[:, 1]


@dataclass(frozen=True, eq=False)
class WTState:
    """WT functions and multipliers on every edge of a truncated tree at one energy."""

    tree: TruncatedQuantumTree
    z: ComplexEnergy
    boundary: BoundaryRule
    edge: EdgeSolutionMatrix
    r_plus_origin: np.ndarray
    r_plus_terminus: np.ndarray
    r_minus_origin: np.ndarray
    r_minus_terminus: np.ndarray
    zeta: np.ndarray
    zeta_hat: np.ndarray

    def vertex_denominator(self, vertex: int) -> complex:
        """R+(v) + R-(v), evaluated through the edge entering v (or leaving the origin)."""
        if vertex == ORIGIN:
            return complex(self.r_plus_origin[0] + self.r_minus_origin[0])
        return complex(self.r_plus_terminus[vertex] + self.r_minus_terminus[vertex])

    def diagonal(self) -> np.ndarray:
        """G(t_v, t_v) for every node v."""
        return _safe_green(self.r_plus_terminus + self.r_minus_terminus)

    def origin_green(self) -> complex:
        return complex(_safe_green(self.vertex_denominator(ORIGIN)))

    def green_at(self, vertex: int) -> complex:
        if vertex == ORIGIN:
            return self.origin_green()
        return complex(_safe_green(self.vertex_denominator(vertex)))

    def edge_multiplier(self, u: int, w: int) -> complex:
        """zeta of the directed tree edge u -> w."""
        if w != ORIGIN and int(self.tree.parent[w]) == u:
            return complex(self.zeta[w])
        if u != ORIGIN and int(self.tree.parent[u]) == w:
            return complex(self.zeta_hat[u])
        raise BacktrackingPathError(f"{u} and {w} are not adjacent")

    def to_record(self) -> WTStateRecord:
        return WTStateRecord(
            system=self.tree.system,
            depth=self.tree.max_depth,
            length=[float(v) for v in self.tree.length],
            alpha=[float(v) for v in self.tree.alpha],
            origin_alpha=self.tree.origin_alpha,
            lam=self.z.lam,
            eta=self.z.eta,
            boundary=self.boundary.kind,
            boundary_values=None if self.boundary.values is None else _pairs(self.boundary.values),
            r_plus_origin=_pairs(self.r_plus_origin),
            r_plus_terminus=_pairs(self.r_plus_terminus),
            r_minus_origin=_pairs(self.r_minus_origin),
            r_minus_terminus=_pairs(self.r_minus_terminus),
            zeta=_pairs(self.zeta),
            zeta_hat=_pairs(self.zeta_hat),
        )

    def to_json(self) -> str:
        return self.to_record().model_dump_json()

    @classmethod
    def from_record(cls, record: WTStateRecord) -> "WTState":
        """Rebuild a state from stored values without recomputing them."""
        tree = expand_truncated_tree(record.system, record.depth).with_parameters(
            np.asarray(record.length, dtype=float),
            np.asarray(record.alpha, dtype=float),
            record.origin_alpha,
        )
        energy = ComplexEnergy(record.lam, record.eta)
        values = None if record.boundary_values is None else _unpairs(record.boundary_values)
        return cls(
            tree=tree,
            z=energy,
            boundary=BoundaryRule(kind=record.boundary, values=values),
            edge=tree_monodromy(tree, energy),
            r_plus_origin=_unpairs(record.r_plus_origin),
            r_plus_terminus=_unpairs(record.r_plus_terminus),
            r_minus_origin=_unpairs(record.r_minus_origin),
            r_minus_terminus=_unpairs(record.r_minus_terminus),
            zeta=_unpairs(record.zeta),
            zeta_hat=_unpairs(record.zeta_hat),
        )

    @classmethod
    def from_json(cls, text: str) -> "WTState":
        return cls.from_record(WTStateRecord.model_validate(json.loads(text)))


def _check_herglotz(values: np.ndarray, mask: np.ndarray, what: str) -> None:
    finite = mask & np.isfinite(values)
    bad = np.nonzero(finite & ~(values.imag > 0))[0]
    if len(bad):
        raise HerglotzViolation(f"{what} at node {int(bad[0])}", complex(values[bad[0]]))


def wt_recursion(
    tree: TruncatedQuantumTree,
    z: EnergyLike,
    boundary: Optional[BoundaryRule] = None,
    check_herglotz: bool = True,
) -> WTState:
    """Fill R+, R- and zeta on every edge by one upward and one downward sweep.

    Args:
        tree: Truncated tree, possibly with perturbed lengths and couplings
        z: Energy; Im z = 0 is accepted only with the cone boundary rule
        boundary: Leaf and origin seeds; defaults to free half-lines
        check_herglotz: Raise HerglotzViolation on a non-positive imaginary part at Im z > 0

    Returns:
        Immutable WTState
    """
    boundary = boundary or BoundaryRule()
    energy = ComplexEnergy.of(z)
    if energy.eta == 0:
        if boundary.kind != "cone":
            raise ValueError("real energies need the cone boundary rule with continued values")
        guard_real_energy(tree.system, energy)
    zc = energy.z
    sqrt_z = complex(np.sqrt(zc))
    edge = tree_monodromy(tree, zc)

    n = tree.size
    r_plus_terminus = np.zeros(n, dtype=complex)
    r_plus_origin = np.zeros(n, dtype=complex)
    child_sums = np.zeros(n, dtype=complex)
    deepest = tree.max_depth
    for d in range(deepest, -1, -1):
        level = tree.level(d)
        if d == deepest:
            nodes = np.arange(*level.indices(n))
            r_plus_terminus[level] = boundary.leaf_terminus(tree, nodes, sqrt_z)
        else:
            r_plus_terminus[level] = child_sums[level] - tree.alpha[level]
        r_plus_origin[level] = _pull_back(edge.take(level), r_plus_terminus[level])
        if d > 0:
            np.add.at(child_sums, tree.parent[level], r_plus_origin[level])

    r_minus_origin = np.zeros(n, dtype=complex)
    r_minus_terminus = np.zeros(n, dtype=complex)
    r_minus_origin[0] = boundary.origin_seed(tree, sqrt_z)
    for d in range(deepest + 1):
        level = tree.level(d)
        r_minus_terminus[level] = _push_forward_backward(edge.take(level), r_minus_origin[level])
        if d < deepest:
            below = tree.level(d + 1)
            parents = tree.parent[below]
            r_minus_origin[below] = r_plus_terminus[parents] + r_minus_terminus[parents] - r_plus_origin[below]

    zeta = edge.C + r_plus_origin * edge.S
    zeta_hat = edge.Sp + r_minus_terminus * edge.S

    if check_herglotz and energy.eta > 0:
        seeded = np.zeros(n, dtype=bool)
        seeded[tree.level(deepest)] = True
        everywhere = np.ones(n, dtype=bool)
        _check_herglotz(r_plus_origin, everywhere, "R+(o)")
        _check_herglotz(r_plus_terminus, ~seeded & (tree.child_count > 0), "R+(t)")
        _check_herglotz(r_minus_terminus, everywhere, "R-(t)")
        _check_herglotz(r_minus_origin, np.arange(n) > 0, "R-(o)")

    logger.debug(f"WT recursion at z={energy}: {n} edges, boundary={boundary.kind}")
    return WTState(
        tree=tree,
        z=energy,
        boundary=boundary,
        edge=edge,
        r_plus_origin=r_plus_origin,
        r_plus_terminus=r_plus_terminus,
        r_minus_origin=r_minus_origin,
        r_minus_terminus=r_minus_terminus,
        zeta=zeta,
        zeta_hat=zeta_hat,
    )


def green_diag(state: WTState, vertex: int) -> GreenValue:
    """G(v, v) = -1/(R+(v) + R-(v)), tagged as a pole when the denominator vanishes."""
    if vertex != ORIGIN and not 0 <= vertex < state.tree.size:
        raise ValueError(f"vertex {vertex} is not in the tree")
    den = state.vertex_denominator(vertex)
    if np.isfinite(den) and abs(den) < POLE_TOLERANCE:
        logger.warning(f"Pole candidate at vertex {vertex}, z={state.z}: |R+ + R-| = {abs(den):.2e}")
        return GreenValue(vertex=vertex, value=complex(np.inf, 0.0), pole=True)
    return GreenValue(vertex=vertex, value=complex(_safe_green(den)))


def _validate_path(tree: TruncatedQuantumTree, path: Sequence[int]) -> None:
    if len(path) < 2:
        raise BacktrackingPathError("a path needs at least two vertices")
    for a, b in zip(path, path[1:]):
        if b not in tree.neighbours(a):
            raise BacktrackingPathError(f"{a} and {b} are not adjacent")
    for a, c in zip(path, path[2:]):
        if a == c:
            raise BacktrackingPathError(f"path backtracks through {a}")


def green_offdiag(state: WTState, path: Sequence[int]) -> tuple[complex, complex]:
    """G between the ends of a non-backtracking path, in two product forms.

    Returns:
        (G(v_0, v_0) * prod zeta(b_i), G(v_k, v_k) * prod zeta(reversed b_i))
    """
    path = [int(v) for v in path]
    _validate_path(state.tree, path)
    forward = state.green_at(path[0])
    for a, b in zip(path, path[1:]):
        forward *= state.edge_multiplier(a, b)
    reverse = state.green_at(path[-1])
    for a, b in zip(path[::-1], path[-2::-1]):
        reverse *= state.edge_multiplier(a, b)
    return forward, reverse


def tree_path(tree: TruncatedQuantumTree, a: int, b: int) -> list[int]:
    """The unique path from a to b through their lowest common ancestor."""
    up_a = tree.path_to_root(a)
    up_b = tree.path_to_root(b)
    on_b = {v: i for i, v in enumerate(up_b)}
    for i, v in enumerate(up_a):
        if v in on_b:
            return up_a[: i + 1] + up_b[: on_b[v]][::-1]
    raise ValueError(f"{a} and {b} are not connected")


def vertex_green(state: WTState, a: int, b: int) -> complex:
    """G(a, b) between any two vertices."""
    if a == b:
        return state.green_at(a)
    return green_offdiag(state, tree_path(state.tree, a, b))[0]


class ACCriterion(BaseModel):
    """Integrals over an interval of (Im R+(o_j) |S_j|^2)^(-p), one row per eta."""

    interval: tuple[float, float]
    p: float
    etas: list[float]
    values: list[list[float]]

    @property
    def stable(self) -> bool:
        """No row grows by more than a factor 2 over the previous eta."""
        arr = np.asarray(self.values)
        return bool(np.all(np.isfinite(arr)) and np.all(arr[1:] <= 2.0 * arr[:-1] + 1e-300))


def ac_criterion_integral(
    system: ConeSystem,
    interval: tuple[float, float],
    etas: Sequence[float],
    p: float = 1.0,
    n_points: int = 201,
) -> ACCriterion:
    """Integrated inverse-moment functional for every root-level label as eta decreases."""
    lo, hi = interval
    if not hi > lo:
        raise ValueError("interval must have positive length")
    grid = np.linspace(lo, hi, n_points)
    rows = []
    for eta in etas:
        integrand = np.empty((n_points, system.size))
        for i, lam in enumerate(grid):
            vector = solve_cone_system(system, complex(lam, eta))
            integrand[i] = (vector.r_plus.imag * np.abs(vector.edge.S) ** 2) ** (-p)
        rows.append([float(v) for v in trapezoid(integrand, grid, axis=0)])
        logger.info(f"Criterion integral on [{lo:g}, {hi:g}] at eta={eta:g}: max={max(rows[-1]):.4g}")
    return ACCriterion(interval=(lo, hi), p=p, etas=[float(e) for e in etas], values=rows)

"""Polynomial system for the normalised multipliers h_j = S_z(L_j) zeta_j of a cone system.

The unknowns satisfy

    1/h_j = F_j(z) - sum_k A_jk h_k,    A_jk = M_jk / S_z(L_k)^2,

with F_j = alpha_j + sum_k M_jk C_z(L_k)/S_z(L_k) + S'_z(L_j)/S_z(L_j).
Off the real axis the right-hand map is a contraction in the gamma
semi-metric; on the axis values are reached by continuation in eta.
"""

import logging
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from src.common.errors import HerglotzViolation, NonConvergence
from src.common.hyperbolic import gamma
from src.common.models import ConeSystem
from src.graph.core import dominating_child
from src.edge.solutions import (
    ComplexEnergy,
    EdgeSolutionMatrix,
    EnergyLike,
    guard_real_energy,
    monodromy_batch,
)

logger = logging.getLogger(__name__)

DIVERGENCE_CAP = 1e6


def label_monodromy(system: ConeSystem, z: EnergyLike) -> EdgeSolutionMatrix:
    """Batched monodromy of one edge per label."""
    ids = np.arange(system.size)
    return monodromy_batch(system.potentials, ids, system.lengths, z)


def f_coefficients(system: ConeSystem, z: EnergyLike, edge: Optional[EdgeSolutionMatrix] = None) -> np.ndarray:
    """F_j(z) = alpha_j + sum_k M_jk C_k/S_k + S'_j/S_j."""
    guard_real_energy(system, z)
    edge = edge if edge is not None else label_monodromy(system, z)
    M = system.matrix_array()
    return np.asarray(system.couplings) + M @ (edge.C / edge.S) + edge.Sp / edge.S


def coupling_matrix(system: ConeSystem, edge: EdgeSolutionMatrix) -> np.ndarray:
    """A_jk = M_jk / S_k^2."""
    return system.matrix_array() / edge.S[np.newaxis, :] ** 2


def polynomial_residual(A: np.ndarray, F: np.ndarray, h: np.ndarray) -> np.ndarray:
    """P_j(h) = sum_k A_jk h_k h_j - F_j h_j + 1."""
    return (A @ h) * h - F * h + 1.0


def fixed_point_map(A: np.ndarray, F: np.ndarray, h: np.ndarray) -> np.ndarray:
    return 1.0 / (F - A @ h)


def free_seed(system: ConeSystem, edge: EdgeSolutionMatrix, z: complex) -> np.ndarray:
    """Multipliers of one-edge cones ending in free half-lines.

    With R+(t_j) = n_j i sqrt(z) - alpha_j, n_j the row sum, h_j = 1/(S'_j/S_j - R+(t_j)).
    """
    r_terminus = system.row_sums() * 1j * np.sqrt(complex(z)) - np.asarray(system.couplings)
    return 1.0 / (edge.Sp / edge.S - r_terminus)


@dataclass(frozen=True)
class HerglotzVector:
    """Solution h of the cone system at one energy, with derived WT data per label."""

    h: np.ndarray
    z: ComplexEnergy
    residual: float
    edge: EdgeSolutionMatrix
    iterations: int = 0
    gaps: tuple[float, ...] = field(default=(), repr=False)

    @property
    def zeta(self) -> np.ndarray:
        """zeta_j = h_j / S_j."""
        return self.h / self.edge.S

    @property
    def r_plus(self) -> np.ndarray:
        """R+ at the origin of a label-j edge: h/S^2 - C/S."""
        return self.h / self.edge.S**2 - self.edge.C / self.edge.S

    def r_plus_terminus(self, system: ConeSystem) -> np.ndarray:
        """R+ at the terminus of a label-j edge: sum_k M_jk R+(k) - alpha_j."""
        return system.matrix_array() @ self.r_plus - np.asarray(system.couplings)

    def r_minus_terminus(self, system: ConeSystem) -> Optional[np.ndarray]:
        """R-(t_j) = R+ at the origin of the reversed edge; needs reverse labels."""
        if system.reverse is None:
            return None
        return self.r_plus[np.asarray(system.reverse)]

    def vertex_green(self, system: ConeSystem) -> Optional[np.ndarray]:
        """G(v, v) at the terminus vertex of each label."""
        r_minus = self.r_minus_terminus(system)
        if r_minus is None:
            return None
        return -1.0 / (self.r_plus_terminus(system) + r_minus)

    def root_green(self, system: ConeSystem) -> Optional[complex]:
        """G(o, o) at the origin of the root edge b_o."""
        back = system.backward_label(system.root_label)
        if back is None:
            return None
        r_minus_origin = self.r_plus_terminus(system)[back]
        return complex(-1.0 / (self.r_plus[system.root_label] + r_minus_origin))


def newton_step(A: np.ndarray, F: np.ndarray, h: np.ndarray) -> np.ndarray:
    """One Newton update for P(h) = 0."""
    Ah = A @ h
    jac = A * h[:, np.newaxis] + np.diag(Ah - F)
    return h - np.linalg.solve(jac, polynomial_residual(A, F, h))


def newton_solve(
    A: np.ndarray,
    F: np.ndarray,
    h0: np.ndarray,
    tol: float = 1e-13,
    max_iter: int = 50,
) -> tuple[np.ndarray, bool]:
    """Newton iteration from h0; returns (h, converged)."""
    h = np.asarray(h0, dtype=complex)
    for _ in range(max_iter):
        try:
            h_next = newton_step(A, F, h)
        except np.linalg.LinAlgError:
            return h, False
        if not np.all(np.isfinite(h_next)):
            return h, False
        step = np.max(np.abs(h_next - h))
        h = h_next
        if step <= tol * max(1.0, float(np.max(np.abs(h)))):
            break
    residual = float(np.max(np.abs(polynomial_residual(A, F, h))))
    return h, residual < 1e-9


def _check_herglotz(h: np.ndarray, where: str) -> None:
    bad = np.nonzero(~(h.imag > 0))[0]
    if len(bad):
        raise HerglotzViolation(f"{where}, label {int(bad[0])}", complex(h[bad[0]]))


def solve_cone_system(
    system: ConeSystem,
    z: EnergyLike,
    tol: float = 1e-12,
    max_iter: int = 100_000,
    initial: Optional[np.ndarray] = None,
    damping: float = 1.0,
    polish_steps: int = 2,
) -> HerglotzVector:
    """Solve the cone system at Im z > 0 by fixed-point iteration with a Newton polish.

    Args:
        system: Cone system
        z: Energy with Im z > 0
        tol: Stop once every component moves by less than tol in gamma
        max_iter: Iteration budget
        initial: Starting vector; defaults to the free-cone multipliers
        damping: Relaxation weight of the new iterate, in (0, 1]
        polish_steps: Newton steps applied after convergence

    Returns:
        HerglotzVector with residual max_j |P_j(h)|
    """
    energy = ComplexEnergy.of(z)
    if not energy.eta > 0:
        raise ValueError("solve_cone_system needs Im z > 0; use limit_on_axis on the real axis")
    if not 0 < damping <= 1:
        raise ValueError("damping must lie in (0, 1]")
    zc = energy.z
    edge = label_monodromy(system, zc)
    F = f_coefficients(system, zc, edge)
    A = coupling_matrix(system, edge)

    h = free_seed(system, edge, zc) if initial is None else np.asarray(initial, dtype=complex)
    _check_herglotz(h, "initial vector")
    gaps: list[float] = []
    for iteration in range(1, max_iter + 1):
        h_next = fixed_point_map(A, F, h)
        if damping < 1:
            h_next = (1 - damping) * h + damping * h_next
        _check_herglotz(h_next, f"fixed-point iterate {iteration}")
        gap = float(np.max(gamma(h_next, h)))
        gaps.append(gap)
        h = h_next
        if gap < tol:
            break
    else:
        raise NonConvergence(f"cone system did not converge at z={zc} in {max_iter} iterations", last=h, gap=gaps[-1])

    for _ in range(polish_steps):
        candidate = newton_step(A, F, h)
        if np.all(candidate.imag > 0) and np.all(np.isfinite(candidate)):
            h = candidate
    residual = float(np.max(np.abs(polynomial_residual(A, F, h))))
    if not residual < 10 * tol:
        raise NonConvergence(f"cone system residual {residual:.2e} at z={zc} exceeds 10*tol", last=h, gap=gaps[-1])
    logger.debug(f"Cone system at z={zc}: {iteration} iterations, residual={residual:.2e}")
    return HerglotzVector(h=h, z=energy, residual=residual, edge=edge, iterations=iteration, gaps=tuple(gaps[-32:]))


@dataclass(frozen=True)
class AxisLimit:
    """Extrapolated boundary value h(lam + i0) and the continuation trace."""

    lam: float
    h: np.ndarray
    converged: bool
    gap: float
    etas: tuple[float, ...]
    values: tuple[np.ndarray, ...] = field(repr=False)
    edge: Optional[EdgeSolutionMatrix] = field(default=None, repr=False)

    @property
    def eta_final(self) -> float:
        return self.etas[-1]

    @property
    def r_plus(self) -> np.ndarray:
        """R+(lam + i0) per label from the extrapolated multipliers."""
        return self.h / self.edge.S**2 - self.edge.C / self.edge.S

    def as_vector(self) -> HerglotzVector:
        return HerglotzVector(h=self.h, z=ComplexEnergy(self.lam, 0.0), residual=self.gap, edge=self.edge)


def default_schedule(eta0: float = 1e-2, rho: float = 0.5, steps: int = 20) -> list[float]:
    """eta_k = eta0 * rho^k, k = 0..steps-1."""
    return [eta0 * rho**k for k in range(steps)]


def richardson(etas: Sequence[float], values: Sequence[np.ndarray]) -> tuple[np.ndarray, float]:
    """Two-level Richardson extrapolation to eta = 0 of values linear-plus-quadratic in eta.

    Returns the extrapolated vector and the gap between the last two levels.
    """
    if len(values) == 1:
        return np.asarray(values[0]), float("inf")

    def first(i: int) -> np.ndarray:
        r = etas[i + 1] / etas[i]
        return (values[i + 1] - r * values[i]) / (1 - r)

    if len(values) == 2:
        r1 = first(0)
        return r1, float(np.max(np.abs(r1 - values[1])))
    a, b = first(len(values) - 3), first(len(values) - 2)
    r = etas[-1] / etas[-2]
    r2 = (b - r**2 * a) / (1 - r**2)
    return r2, float(np.max(np.abs(r2 - b)))


def continue_to(
    system: ConeSystem,
    lam: float,
    etas: Sequence[float],
    h_start: np.ndarray,
) -> list[np.ndarray]:
    """Track the Herglotz branch from the starting multipliers h_start through decreasing etas.

    Newton continuation with a fixed-point fallback whenever Newton fails or
    lands outside the upper half-plane.
    """
    values = []
    h = h_start
    for eta in etas:
        z = complex(lam, eta)
        edge = label_monodromy(system, z)
        F = f_coefficients(system, z, edge)
        A = coupling_matrix(system, edge)
        candidate, ok = newton_solve(A, F, h)
        if not ok or not np.all(candidate.imag > 0):
            logger.debug(f"Newton failed at lam={lam}, eta={eta:.3e}; falling back to fixed point")
            try:
                candidate = solve_cone_system(system, z, tol=1e-13, max_iter=20_000, initial=h if np.all(h.imag > 0) else None).h
            except NonConvergence as exc:
                candidate = exc.last
        h = candidate
        values.append(h)
    return values


def limit_on_axis(
    system: ConeSystem,
    lam: float,
    eta_schedule: Optional[Sequence[float]] = None,
    tol: float = 1e-8,
    cap: float = DIVERGENCE_CAP,
) -> AxisLimit:
    """Boundary value h(lam + i0) by warm-started continuation and Richardson extrapolation.

    The branch is started by a fixed-point solve at eta = 1 and followed by
    halving eta down to the first scheduled value. ``converged`` is False
    when the last two extrapolation levels differ by more than tol or the
    multipliers exceed ``cap``.
    """
    guard_real_energy(system, lam)
    schedule = sorted(eta_schedule if eta_schedule is not None else default_schedule(), reverse=True)
    if not schedule or schedule[-1] <= 0:
        raise ValueError("eta schedule must be non-empty and positive")

    h = solve_cone_system(system, complex(lam, 1.0)).h
    warmup = []
    eta = 0.5
    while eta > schedule[0]:
        warmup.append(eta)
        eta /= 2
    if warmup:
        h = continue_to(system, lam, warmup, h)[-1]
    values = continue_to(system, lam, schedule, h)

    limit, gap = richardson(schedule, values)
    finite = bool(np.all(np.isfinite(limit)))
    converged = finite and gap < tol and float(np.max(np.abs(limit))) < cap
    if not converged:
        logger.warning(f"Axis limit at lam={lam:.8g} not converged (gap={gap:.2e}, |h|max={np.max(np.abs(limit)):.2e})")
    edge = label_monodromy(system, complex(lam, 0.0))
    return AxisLimit(
        lam=float(lam),
        h=limit,
        converged=converged,
        gap=gap,
        etas=tuple(schedule),
        values=tuple(values),
        edge=edge,
    )


def perron_weights(system: ConeSystem, vector: HerglotzVector) -> tuple[np.ndarray, np.ndarray]:
    """Two-step weight matrix P_jk and its Perron eigenvector.

    P_jk is the total weight p_x carried by label-k vertices of the
    two-step set S_{*,*'} of a label-j vertex, with weights proportional
    to Im H as in the contraction estimate.
    """
    M = system.matrix_array()
    im_h = (vector.r_plus / np.sqrt(vector.z.z)).imag
    P = np.zeros((system.size, system.size))
    for j in range(system.size):
        prime = dominating_child(system, j)
        total = float(M[j] @ im_h)
        if prime is None or total <= 0:
            continue
        first = M[j] * im_h / total
        p_prime = im_h[prime] / total
        first[prime] -= p_prime
        second = M[prime] * im_h / float(M[prime] @ im_h)
        P[j] = first + p_prime * second
    eigenvalues, eigenvectors = np.linalg.eig(P.T)
    lead = int(np.argmax(eigenvalues.real))
    weights = np.abs(eigenvectors[:, lead].real)
    if weights.sum() > 0:
        weights = weights / weights.sum()
    return P, weights

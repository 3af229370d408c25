"""Fundamental solutions C_z, S_z on a single edge, monodromy data and Dirichlet sets.

C_z and S_z solve -psi'' + W psi = z psi with (C, C')(0) = (1, 0) and
(S, S')(0) = (0, 1). Zero and constant potentials use closed forms,
everything else is integrated with scipy's embedded Runge-Kutta.
"""

import logging
from dataclasses import dataclass
from typing import Optional, Sequence, Union

import numpy as np
from scipy.integrate import solve_ivp
from scipy.optimize import brentq

from src.common.errors import DirichletProximityError, IntegrationError
from src.common.models import ConeSystem, PotentialSpec
from src.common.settings import DEFAULT

logger = logging.getLogger(__name__)

SERIES_THRESHOLD = 1e-3
WRONSKIAN_TOLERANCE = 1e-10


@dataclass(frozen=True)
class ComplexEnergy:
    """Spectral parameter z = lam + i eta with eta >= 0."""

    lam: float
    eta: float = 0.0

    def __post_init__(self):
        if self.eta < 0:
            raise ValueError(f"energy must lie in the closed upper half-plane, got eta={self.eta}")

    @property
    def z(self) -> complex:
        # +0.0 keeps the principal branch on the upper lip of the cut
        return complex(self.lam, self.eta + 0.0)

    @property
    def sqrt(self) -> complex:
        return complex(np.sqrt(self.z))

    @classmethod
    def of(cls, z: Union["ComplexEnergy", complex, float]) -> "ComplexEnergy":
        if isinstance(z, ComplexEnergy):
            return z
        z = complex(z)
        return cls(z.real, z.imag)

    @classmethod
    def parse(cls, text: str) -> "ComplexEnergy":
        """Parse strings such as "3+0.5i" or "2"; a negative imaginary part is rejected."""
        compact = text.replace(" ", "").replace("i", "j").replace("I", "j")
        try:
            value = complex(compact)
        except ValueError as exc:
            raise ValueError(f"cannot parse complex energy {text!r}") from exc
        return cls(value.real, value.imag)

    def __str__(self) -> str:
        return f"{self.lam:g}+{self.eta:g}i"


EnergyLike = Union[ComplexEnergy, complex, float]


def as_complex(z: EnergyLike) -> complex:
    """Normalise an energy to a Python complex on the principal sheet."""
    if isinstance(z, ComplexEnergy):
        return z.z
    z = complex(z)
    return complex(z.real, z.imag + 0.0)


def principal_sqrt(z):
    """Square root with Im >= 0 for z in the closed upper half-plane."""
    return np.sqrt(np.asarray(z, dtype=complex))


@dataclass(frozen=True)
class EdgeSolutionMatrix:
    """Monodromy entries (C(L), S(L), C'(L), S'(L)); arrays are allowed for batched edges."""

    C: complex
    S: complex
    Cp: complex
    Sp: complex

    def wronskian(self):
        return self.C * self.Sp - self.Cp * self.S

    def reversed(self) -> "EdgeSolutionMatrix":
        """Monodromy of the reversed edge, whose potential is W(L - x)."""
        return EdgeSolutionMatrix(C=self.Sp, S=self.S, Cp=self.Cp, Sp=self.C)

    def take(self, index) -> "EdgeSolutionMatrix":
        return EdgeSolutionMatrix(
            C=np.asarray(self.C)[index],
            S=np.asarray(self.S)[index],
            Cp=np.asarray(self.Cp)[index],
            Sp=np.asarray(self.Sp)[index],
        )

    def as_row(self) -> list[float]:
        """Real/imaginary pairs in (C, S, Cp, Sp) order."""
        row = []
        for value in (self.C, self.S, self.Cp, self.Sp):
            row.extend([float(np.real(value)), float(np.imag(value))])
        return row


def _trig_solution(w, x):
    """Closed-form (C, S, C', S') of -psi'' = w psi at x, batched over w and x."""
    w = np.asarray(w, dtype=complex)
    x = np.asarray(x, dtype=float)
    k = np.sqrt(w)
    kx = k * x
    small = np.abs(w) * x**2 < SERIES_THRESHOLD
    safe_k = np.where(small, 1.0, k)
    with np.errstate(invalid="ignore", divide="ignore"):
        s_trig = np.sin(kx) / safe_k
    u = -w * x**2
    s_series = x * (1 + u / 6 + u**2 / 120 + u**3 / 5040 + u**4 / 362880)
    S = np.where(small, s_series, s_trig)
    C = np.cos(kx)
    return C, S, -w * S, C


def _potential_function(potential: PotentialSpec, length: float):
    if potential.variant == "cosine":
        omega = 2.0 * np.pi / length
        c1, c2 = potential.c1, potential.c2
        return lambda x: c1 + c2 * np.cos(omega * x)
    if potential.variant == "sampled":
        grid = np.linspace(0.0, length, len(potential.values))
        values = np.asarray(potential.values)
        return lambda x: float(np.interp(x, grid, values))
    shift = potential.shift
    return lambda x: shift


def _potential_bound(potential: PotentialSpec) -> float:
    if potential.variant == "cosine":
        return abs(potential.c1) + abs(potential.c2)
    if potential.variant == "sampled":
        return float(np.max(np.abs(potential.values)))
    return abs(potential.shift)


def _piece_count(potential: PotentialSpec, length: float, z: complex) -> int:
    # each piece advances the phase (or the growth exponent) by at most about one
    return max(1, int(np.ceil(length * np.sqrt(abs(z) + _potential_bound(potential)))))


def _integrate(
    potential: PotentialSpec,
    length: float,
    z: complex,
    xs: Optional[np.ndarray] = None,
    rtol: Optional[float] = None,
    atol: Optional[float] = None,
    method: Optional[str] = None,
):
    """C, S, C', S' at sorted points xs (default: the terminus).

    The edge is cut into short pieces, each integrated from the identity, and
    the transfer matrices are multiplied. The Wronskian of the product is the
    product of the pieces' Wronskians, so solution growth does not amplify
    integrator error in it. The result is checked, never renormalised.
    """
    W = _potential_function(potential, length)
    xs = np.array([length]) if xs is None else np.asarray(xs, dtype=float)
    breaks = np.linspace(0.0, length, _piece_count(potential, length, z) + 1)
    if potential.variant == "sampled":
        # W is only piecewise linear; keep its kinks on piece boundaries
        breaks = np.union1d(breaks, np.linspace(0.0, length, len(potential.values)))
    out = np.empty((4, len(xs)), dtype=complex)
    transfer = np.eye(2, dtype=complex)
    residual = 0.0

    for i, (a, b) in enumerate(zip(breaks[:-1], breaks[1:])):
        last = i == len(breaks) - 2
        inside = (xs >= a) & ((xs <= b) if last else (xs < b))
        local = xs[inside] - a
        t_eval = np.unique(np.append(local, b - a))

        def rhs(t, y, a=a):
            coeff = W(a + t) - z
            return np.array([y[1], coeff * y[0], y[3], coeff * y[2]])

        sol = solve_ivp(
            rhs,
            (0.0, b - a),
            np.array([1.0, 0.0, 0.0, 1.0], dtype=complex),
            method=method or DEFAULT.ode_method,
            rtol=rtol or DEFAULT.ode_rtol,
            atol=atol or DEFAULT.ode_atol,
            t_eval=t_eval,
        )
        if not sol.success:
            raise IntegrationError(f"ODE integration failed: {sol.message}")
        mc, mcp, ms, msp = sol.y
        (t00, t01), (t10, t11) = transfer
        C = mc * t00 + ms * t10
        Cp = mcp * t00 + msp * t10
        S = mc * t01 + ms * t11
        Sp = mcp * t01 + msp * t11
        residual = max(residual, float(np.max(np.abs(C * Sp - Cp * S - 1.0))))

        rows = np.searchsorted(t_eval, local)
        out[:, inside] = np.stack([C[rows], Cp[rows], S[rows], Sp[rows]])
        transfer = np.array([[C[-1], S[-1]], [Cp[-1], Sp[-1]]])

    if residual > WRONSKIAN_TOLERANCE:
        raise IntegrationError(f"Wronskian drift on edge of length {length}", residual)
    C, Cp, S, Sp = out
    return C, S, Cp, Sp


def fundamental_solution(
    potential: PotentialSpec,
    length: float,
    z: EnergyLike,
    *,
    rtol: Optional[float] = None,
    atol: Optional[float] = None,
    method: Optional[str] = None,
) -> EdgeSolutionMatrix:
    """Monodromy (C_z(L), S_z(L), C'_z(L), S'_z(L)) of a single edge.

    Args:
        potential: Edge potential, oriented from the edge origin
        length: Edge length L > 0
        z: Spectral parameter
        rtol, atol, method: Integrator overrides for non closed-form potentials

    Returns:
        EdgeSolutionMatrix with Wronskian C S' - C' S = 1
    """
    if not length > 0:
        raise ValueError(f"edge length must be positive, got {length}")
    z = as_complex(z)
    if potential.is_closed_form:
        C, S, Cp, Sp = _trig_solution(z - potential.shift, length)
        return EdgeSolutionMatrix(complex(C), complex(S), complex(Cp), complex(Sp))
    C, S, Cp, Sp = _integrate(potential, length, z, rtol=rtol, atol=atol, method=method)
    return EdgeSolutionMatrix(complex(C[-1]), complex(S[-1]), complex(Cp[-1]), complex(Sp[-1]))


def edge_profile(potential: PotentialSpec, length: float, z: EnergyLike, xs) -> EdgeSolutionMatrix:
    """C, S, C', S' at interior points xs of one edge (batched)."""
    z = as_complex(z)
    xs = np.atleast_1d(np.asarray(xs, dtype=float))
    if np.any(xs < 0) or np.any(xs > length * (1 + 1e-12)):
        raise ValueError("profile points must lie in [0, L]")
    if potential.is_closed_form:
        return EdgeSolutionMatrix(*_trig_solution(z - potential.shift, xs))
    order = np.argsort(xs)
    sorted_xs = np.clip(xs[order], 0.0, length)
    C, S, Cp, Sp = _integrate(potential, length, z, xs=sorted_xs)
    inverse = np.empty_like(order)
    inverse[order] = np.arange(len(order))
    return EdgeSolutionMatrix(C[inverse], S[inverse], Cp[inverse], Sp[inverse])


def monodromy_batch(
    potentials: Sequence[PotentialSpec],
    potential_ids,
    lengths,
    z: EnergyLike,
) -> EdgeSolutionMatrix:
    """Monodromies for many edges at once.

    Edges with closed-form potentials are evaluated vectorised; the rest are
    integrated once per distinct (potential, length) pair.
    """
    z = as_complex(z)
    potential_ids = np.asarray(potential_ids, dtype=np.int64)
    lengths = np.asarray(lengths, dtype=float)
    shifts = np.array([p.shift for p in potentials])
    C, S, Cp, Sp = _trig_solution(z - shifts[potential_ids], lengths)
    C, S, Cp, Sp = (np.array(a, dtype=complex, copy=True) for a in (C, S, Cp, Sp))
    numeric = np.array([not p.is_closed_form for p in potentials])
    if numeric.any():
        cache: dict[tuple[int, float], EdgeSolutionMatrix] = {}
        for index in np.nonzero(numeric[potential_ids])[0]:
            key = (int(potential_ids[index]), float(lengths[index]))
            if key not in cache:
                cache[key] = fundamental_solution(potentials[key[0]], key[1], z)
            sol = cache[key]
            C[index], S[index], Cp[index], Sp[index] = sol.C, sol.S, sol.Cp, sol.Sp
        logger.debug(f"Integrated {len(cache)} distinct edges at z={z}")
    return EdgeSolutionMatrix(C, S, Cp, Sp)


@dataclass(frozen=True)
class DirichletSpectrum:
    """Dirichlet values per label and their merged sorted union."""

    per_label: list[np.ndarray]
    merged: np.ndarray


def _dirichlet_values(
    potential: PotentialSpec,
    length: float,
    lam_max: float,
    scan_step: float,
) -> np.ndarray:
    if potential.is_closed_form:
        shift = potential.shift
        if lam_max <= shift:
            return np.empty(0)
        n_max = int(np.floor(length * np.sqrt(lam_max - shift) / np.pi))
        n = np.arange(1, n_max + 1)
        values = (np.pi * n / length) ** 2 + shift
        return values[values <= lam_max]

    def s_of(lam: float) -> float:
        return fundamental_solution(potential, length, complex(lam, 0.0)).S.real

    # Dirichlet eigenvalues lie strictly above min W.
    lo = potential.min_value()
    grid = np.arange(lo, lam_max + scan_step, scan_step)
    grid = grid[grid <= lam_max]
    if len(grid) < 2:
        return np.empty(0)
    signs = np.array([s_of(lam) for lam in grid])
    roots = []
    for a, b, fa, fb in zip(grid[:-1], grid[1:], signs[:-1], signs[1:]):
        if fa == 0.0:
            roots.append(a)
        elif fa * fb < 0:
            roots.append(brentq(s_of, a, b, xtol=1e-13, rtol=1e-14))
    return np.array(sorted(set(roots)))


def dirichlet_spectrum(
    lengths_or_system: Union[ConeSystem, Sequence[float]],
    lam_max: float,
    potentials: Optional[Sequence[PotentialSpec]] = None,
    scan_step: float = 0.05,
) -> DirichletSpectrum:
    """Dirichlet values {lam <= lam_max : S_lam(L_j) = 0} per label.

    Accepts a ConeSystem (labels plus the root edge when it differs) or a
    plain sequence of lengths with optional potentials.
    """
    if not np.isfinite(lam_max):
        raise ValueError("lam_max must be finite")
    if isinstance(lengths_or_system, ConeSystem):
        system = lengths_or_system
        lengths = list(system.lengths)
        potentials = list(system.potentials)
        if system.root_length is not None or system.root_potential is not None:
            lengths.append(system.edge_length_of_root)
            potentials.append(system.edge_potential_of_root)
    else:
        lengths = [float(length) for length in lengths_or_system]
        potentials = list(potentials) if potentials is not None else [PotentialSpec()] * len(lengths)
    per_label = [
        _dirichlet_values(p, length, lam_max, scan_step) for p, length in zip(potentials, lengths)
    ]
    merged = np.unique(np.concatenate(per_label)) if per_label else np.empty(0)
    if len(merged) > 1:
        keep = np.concatenate([[True], np.diff(merged) > 1e-9 * np.maximum(1.0, merged[1:])])
        merged = merged[keep]
    return DirichletSpectrum(per_label=per_label, merged=merged)


def thickened_dirichlet(system: ConeSystem, eps: float, lam_max: float) -> list[tuple[float, float]]:
    """Merged intervals covering the Dirichlet values of all lengths in [L_j - eps, L_j + eps].

    For closed-form potentials the n-th interval is
    [(pi n)^2/(L + eps)^2 + c, (pi n)^2/(L - eps)^2 + c]; otherwise the n-th
    Dirichlet values at L + eps and L - eps bound it.
    """
    if eps < 0:
        raise ValueError("eps must be nonnegative")
    lengths = list(system.lengths) + [system.edge_length_of_root]
    potentials = list(system.potentials) + [system.edge_potential_of_root]
    if eps >= min(lengths):
        raise ValueError(f"eps={eps} must be smaller than the shortest length {min(lengths)}")
    intervals: list[tuple[float, float]] = []
    for potential, length in zip(potentials, lengths):
        if potential.is_closed_form:
            shift = potential.shift
            n = np.arange(1, int(np.floor((length + eps) * np.sqrt(max(lam_max - shift, 0.0)) / np.pi)) + 1)
            lows = (np.pi * n / (length + eps)) ** 2 + shift
            highs = (np.pi * n / (length - eps)) ** 2 + shift
        else:
            # Upper end: the shorter edge's values, scanned past lam_max so every low end is paired.
            lows = _dirichlet_values(potential, length + eps, lam_max, 0.05)
            highs = _dirichlet_values(potential, length - eps, lam_max * 4 + 100.0, 0.05)[: len(lows)]
            lows = lows[: len(highs)]
        for lo, hi in zip(lows, highs):
            if lo <= lam_max:
                intervals.append((max(float(lo), 0.0), min(float(hi), lam_max)))
    intervals.sort()
    merged: list[tuple[float, float]] = []
    for lo, hi in intervals:
        if merged and lo <= merged[-1][1]:
            merged[-1] = (merged[-1][0], max(merged[-1][1], hi))
        else:
            merged.append((lo, hi))
    return merged


def nearest_dirichlet(spectrum: np.ndarray, lam: float) -> Optional[float]:
    if len(spectrum) == 0:
        return None
    index = int(np.argmin(np.abs(spectrum - lam)))
    return float(spectrum[index])


def dirichlet_distance(potential: PotentialSpec, length: float, lam: float) -> float:
    """Distance from lam to the Dirichlet spectrum of one edge; inf if none is nearby."""
    values = _dirichlet_values(potential, length, lam + max(1.0, abs(lam)), 0.05)
    if len(values) == 0:
        return float("inf")
    return float(np.min(np.abs(values - lam)))


def check_dirichlet_guard(spectrum: DirichletSpectrum, lam: float, guard: Optional[float] = None) -> None:
    """Raise DirichletProximityError if lam lies within ``guard`` of a Dirichlet value."""
    guard = DEFAULT.dirichlet_guard if guard is None else guard
    nearest = nearest_dirichlet(spectrum.merged, lam)
    if nearest is not None and abs(nearest - lam) < guard:
        raise DirichletProximityError(lam, nearest, guard)


def guard_real_energy(system: ConeSystem, z: EnergyLike, guard: Optional[float] = None) -> None:
    """Apply the Dirichlet guard when z sits on the real axis."""
    energy = ComplexEnergy.of(z)
    if energy.eta > 0:
        return
    spectrum = dirichlet_spectrum(system, energy.lam + 1.0)
    check_dirichlet_guard(spectrum, energy.lam, guard)

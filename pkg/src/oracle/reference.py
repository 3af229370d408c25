"""Closed-form references: the (q+1)-regular tree and the Dirichlet interval."""

import logging
from typing import Optional

import numpy as np
from pydantic import BaseModel
from scipy.optimize import brentq

from src.common.models import PotentialSpec
from src.edge.solutions import ComplexEnergy, EnergyLike, fundamental_solution

logger = logging.getLogger(__name__)


class RegularTreeReference(BaseModel):
    """Decaying solution of q S^-2 h^2 - F h + 1 = 0 and the quantities derived from it.

    ``discriminant`` is (S F)^2 - 4q; it is real on the real axis and
    negative exactly inside the bands.
    """

    q: int
    lam: float
    eta: float
    h: complex
    zeta: complex
    r_plus: complex
    r_plus_terminus: complex
    green: complex
    discriminant: complex

    @property
    def in_band(self) -> bool:
        return self.eta == 0 and self.discriminant.real < 0


def _coefficients(q: int, length: float, alpha: float, z: complex, potential: PotentialSpec):
    edge = fundamental_solution(potential, length, z)
    sf = alpha * edge.S + q * edge.C + edge.Sp
    return edge, sf


def regular_tree_reference(
    q: int,
    length: float = 1.0,
    alpha: float = 0.0,
    z: EnergyLike = 1j,
    potential: Optional[PotentialSpec] = None,
) -> RegularTreeReference:
    """Analytic cone solution of the equilateral (q+1)-regular tree at z.

    Off the axis the root with the smaller |zeta| decays (the two roots
    have zeta_1 zeta_2 = 1/q); on the axis inside a band the roots are
    conjugate and the one with Im h > 0 is taken.
    """
    if q < 1:
        raise ValueError("q must be >= 1")
    potential = potential or PotentialSpec()
    if not potential.is_symmetric:
        raise ValueError("the regular reference needs a symmetric edge potential")
    energy = ComplexEnergy.of(z)
    edge, sf = _coefficients(q, length, alpha, energy.z, potential)
    S = edge.S
    discriminant = sf**2 - 4 * q
    root = np.sqrt(complex(discriminant))
    # h = S^2 (F +- sqrt(F^2 - 4 q/S^2))/(2q) with F = sf/S
    candidates = [S * (sf + root) / (2 * q), S * (sf - root) / (2 * q)]
    if energy.eta == 0 and discriminant.real < 0:
        h = max(candidates, key=lambda c: c.imag)
    else:
        h = min(candidates, key=lambda c: abs(c / S))
    r_plus = h / S**2 - edge.C / S
    r_terminus = q * r_plus - alpha
    return RegularTreeReference(
        q=q,
        lam=energy.lam,
        eta=energy.eta,
        h=complex(h),
        zeta=complex(h / S),
        r_plus=complex(r_plus),
        r_plus_terminus=complex(r_terminus),
        green=complex(-1.0 / (r_terminus + r_plus)),
        discriminant=complex(discriminant),
    )


def _discriminant(q: int, length: float, alpha: float, lam: float, potential: PotentialSpec) -> float:
    _, sf = _coefficients(q, length, alpha, complex(lam, 0.0), potential)
    return float((sf**2).real) - 4 * q


def regular_tree_band_edges(
    q: int,
    length: float = 1.0,
    alpha: float = 0.0,
    lam_max: float = 40.0,
    lam_min: float = 0.0,
    n_grid: int = 4000,
    potential: Optional[PotentialSpec] = None,
) -> list[tuple[float, float]]:
    """Bands {discriminant < 0} in [lam_min, lam_max], with edges refined by brentq."""
    potential = potential or PotentialSpec()
    grid = np.linspace(lam_min, lam_max, n_grid)
    values = np.array([_discriminant(q, length, alpha, lam, potential) for lam in grid])

    def edge_between(a: float, b: float) -> float:
        return brentq(lambda lam: _discriminant(q, length, alpha, lam, potential), a, b, xtol=1e-14)

    bands = []
    inside = values < 0
    i = 0
    while i < len(grid):
        if not inside[i]:
            i += 1
            continue
        j = i
        while j + 1 < len(grid) and inside[j + 1]:
            j += 1
        lo = edge_between(grid[i - 1], grid[i]) if i > 0 else float(grid[i])
        hi = edge_between(grid[j], grid[j + 1]) if j + 1 < len(grid) else float(grid[j])
        bands.append((float(lo), float(hi)))
        i = j + 1
    logger.debug(f"Regular tree q={q}: {len(bands)} bands below {lam_max:g}")
    return bands


def interval_green(length: float, z: EnergyLike, x, y=None):
    """Green function of -d^2/dx^2 on [0, L] with Dirichlet ends: sin(k x<) sin(k(L - x>))/(k sin kL)."""
    k = ComplexEnergy.of(z).sqrt
    x = np.asarray(x, dtype=float)
    y = x if y is None else np.asarray(y, dtype=float)
    lo, hi = np.minimum(x, y), np.maximum(x, y)
    return np.sin(k * lo) * np.sin(k * (length - hi)) / (k * np.sin(k * length))

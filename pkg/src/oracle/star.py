"""Lowest eigenvalue of a star graph with Dirichlet outer ends and a delta condition at the centre."""

import logging
from typing import Optional, Sequence

import numpy as np
from pydantic import BaseModel, Field
from scipy.optimize import brentq

from src.common.errors import NoSignChangeError
from src.common.models import PotentialSpec
from src.edge.solutions import dirichlet_spectrum, fundamental_solution

logger = logging.getLogger(__name__)

MAX_EXPANSIONS = 60


class StarBottom(BaseModel):
    """E0 solves Z(E) = alpha below the smallest Dirichlet value; ``trace`` keeps the bracket search."""

    e0: float
    dirichlet_bottom: float
    alpha: float
    trace: list[tuple[float, float]] = Field(default_factory=list)


def star_function(energy: float, lengths: Sequence[float], potentials: Sequence[PotentialSpec]) -> float:
    """Z(E) = sum over edges of -C_E(L)/S_E(L)."""
    total = 0.0
    for length, potential in zip(lengths, potentials):
        sol = fundamental_solution(potential, length, complex(energy, 0.0))
        total -= sol.C.real / sol.S.real
    return total


def _smallest_dirichlet(lengths: Sequence[float], potentials: Sequence[PotentialSpec]) -> float:
    lam_max = max(10.0, max(abs(p.max_abs()) for p in potentials) + 10.0)
    for _ in range(MAX_EXPANSIONS):
        merged = dirichlet_spectrum(list(lengths), lam_max, potentials=list(potentials)).merged
        if len(merged):
            return float(merged[0])
        lam_max *= 2
    raise NoSignChangeError("no Dirichlet value found for the star edges")


def star_bottom(
    lengths: Sequence[float],
    alpha: float = 0.0,
    potentials: Optional[Sequence[PotentialSpec]] = None,
    xtol: float = 1e-13,
) -> StarBottom:
    """Root of Z(E) = alpha on (-E_big, E_D), where E_D is the smallest Dirichlet value of the edges.

    Z tends to -inf as E -> -inf and to +inf as E approaches E_D from below,
    so the bracket always exists for valid input.

    Raises:
        NoSignChangeError: If either end of the bracket cannot be established
    """
    lengths = [float(length) for length in lengths]
    if len(lengths) < 2:
        raise ValueError("a star needs degree d >= 2")
    if any(not length > 0 for length in lengths):
        raise ValueError("edge lengths must be positive")
    potentials = list(potentials) if potentials is not None else [PotentialSpec()] * len(lengths)
    if len(potentials) != len(lengths):
        raise ValueError("one potential per edge is required")

    def target(energy: float) -> float:
        return star_function(energy, lengths, potentials) - alpha

    e_d = _smallest_dirichlet(lengths, potentials)
    trace: list[tuple[float, float]] = []

    w_norm = max(p.max_abs() for p in potentials)
    lower = -max(100.0, 4 * w_norm + 4 * alpha**2)
    for _ in range(MAX_EXPANSIONS):
        value = target(lower)
        trace.append((lower, value))
        if value < 0:
            break
        lower *= 2
    else:
        raise NoSignChangeError(f"Z(E) stays above alpha={alpha} down to E={lower:g}")

    gap = 1e-3 * max(1.0, abs(e_d))
    for _ in range(MAX_EXPANSIONS):
        upper = e_d - gap
        value = target(upper)
        trace.append((upper, value))
        if value > 0:
            break
        gap /= 4
    else:
        raise NoSignChangeError(f"Z(E) stays below alpha={alpha} up to E_D={e_d:g}")

    e0 = brentq(target, lower, upper, xtol=xtol, rtol=4 * np.finfo(float).eps)
    if not e0 < e_d:
        raise NoSignChangeError(f"star root {e0} is not below the Dirichlet bottom {e_d}")
    logger.debug(f"Star bottom E0={e0:.12g} below E_D={e_d:.12g} after {len(trace)} bracket evaluations")
    return StarBottom(e0=float(e0), dirichlet_bottom=e_d, alpha=alpha, trace=trace)

"""Band detection on a real energy grid from boundary values of the cone system."""

import logging
from functools import partial
from typing import Literal, Optional, Sequence

import numpy as np
from pydantic import BaseModel, Field

from src.common.errors import DirichletProximityError
from src.common.models import ConeSystem
from src.common.parallel import map_items
from src.cone.solver import (
    continue_to,
    label_monodromy,
    limit_on_axis,
    solve_cone_system,
)
from src.edge.solutions import guard_real_energy

logger = logging.getLogger(__name__)

PointStatus = Literal["band", "gap", "exceptional", "dirichlet"]

REFINE_ETA = 1e-13


class BandRow(BaseModel):
    """One grid point of a band scan."""

    lam: float
    status: PointStatus
    eta_final: Optional[float] = None
    im_h: list[float] = Field(default_factory=list)
    im_r_plus: list[float] = Field(default_factory=list)
    im_green: Optional[float] = None
    band_id: Optional[int] = None


class BandReport(BaseModel):
    """Bands as disjoint closed intervals plus the per-point scan."""

    bands: list[tuple[float, float]] = Field(default_factory=list)
    exceptional: list[float] = Field(default_factory=list)
    dirichlet: list[float] = Field(default_factory=list)
    rows: list[BandRow] = Field(default_factory=list)
    im_threshold: float = 1e-6

    def contains(self, lam: float) -> bool:
        return any(lo <= lam <= hi for lo, hi in self.bands)


def classify_point(system: ConeSystem, lam: float, im_threshold: float = 1e-6) -> BandRow:
    """Status of a single real energy from the extrapolated boundary values."""
    try:
        limit = limit_on_axis(system, lam)
    except DirichletProximityError:
        return BandRow(lam=lam, status="dirichlet")
    im_r = limit.r_plus.imag
    green = limit.as_vector().root_green(system)
    if not limit.converged:
        status: PointStatus = "exceptional"
    elif float(np.min(im_r)) > im_threshold:
        status = "band"
    else:
        status = "gap"
    return BandRow(
        lam=lam,
        status=status,
        eta_final=limit.eta_final,
        im_h=[float(v) for v in limit.h.imag],
        im_r_plus=[float(v) for v in im_r],
        im_green=None if green is None else float(np.imag(green)),
    )


def in_band_near_axis(system: ConeSystem, lam: float, im_threshold: float, eta_min: float = REFINE_ETA) -> bool:
    """Band test from the raw continued value at a tiny eta, used for edge bisection."""
    try:
        guard_real_energy(system, lam)
    except DirichletProximityError:
        return False
    h = solve_cone_system(system, complex(lam, 1.0)).h
    etas = []
    eta = 0.5
    while eta > eta_min:
        etas.append(eta)
        eta /= 2
    etas.append(eta_min)
    h = continue_to(system, lam, etas, h)[-1]
    edge = label_monodromy(system, complex(lam, eta_min))
    r_plus = h / edge.S**2 - edge.C / edge.S
    return bool(np.min(r_plus.imag) > im_threshold)


def refine_edge(
    system: ConeSystem,
    inside: float,
    outside: float,
    im_threshold: float,
    xtol: float = 1e-10,
    max_iter: int = 60,
) -> float:
    """Bisect between an in-band and an out-of-band energy; returns the in-band end."""
    for _ in range(max_iter):
        if abs(outside - inside) <= xtol:
            break
        mid = 0.5 * (inside + outside)
        if in_band_near_axis(system, mid, im_threshold):
            inside = mid
        else:
            outside = mid
    return inside


def detect_bands(
    system: ConeSystem,
    lam_grid: Sequence[float],
    im_threshold: float = 1e-6,
    refine: bool = True,
    workers: int = 1,
) -> BandReport:
    """Group grid points with min_j Im R+(lam + i0)(j) > im_threshold into bands.

    Args:
        system: Cone system
        lam_grid: Increasing real energies
        im_threshold: Positivity threshold for Im R+
        refine: Bisect band endpoints against neighbouring gap points
        workers: Process count for the per-point scan

    Returns:
        BandReport with disjoint closed bands, exceptional and Dirichlet points
    """
    grid = np.asarray(lam_grid, dtype=float)
    if grid.ndim != 1 or len(grid) == 0:
        raise ValueError("lam_grid must be a non-empty 1-d sequence")
    if np.any(np.diff(grid) <= 0):
        raise ValueError("lam_grid must be strictly increasing")

    rows = map_items(partial(classify_point, system, im_threshold=im_threshold), list(map(float, grid)), workers)

    bands: list[tuple[float, float]] = []
    i = 0
    while i < len(rows):
        if rows[i].status != "band":
            i += 1
            continue
        j = i
        while j + 1 < len(rows) and rows[j + 1].status == "band":
            j += 1
        lo, hi = rows[i].lam, rows[j].lam
        if refine and i > 0 and rows[i - 1].status == "gap":
            lo = refine_edge(system, lo, rows[i - 1].lam, im_threshold)
        if refine and j + 1 < len(rows) and rows[j + 1].status == "gap":
            hi = refine_edge(system, hi, rows[j + 1].lam, im_threshold)
        for k in range(i, j + 1):
            rows[k] = rows[k].model_copy(update={"band_id": len(bands)})
        bands.append((lo, hi))
        i = j + 1

    report = BandReport(
        bands=bands,
        exceptional=[r.lam for r in rows if r.status == "exceptional"],
        dirichlet=[r.lam for r in rows if r.status == "dirichlet"],
        rows=rows,
        im_threshold=im_threshold,
    )
    logger.info(
        f"Band scan over [{grid[0]:g}, {grid[-1]:g}] ({len(grid)} points): "
        f"{len(bands)} bands, {len(report.exceptional)} exceptional, {len(report.dirichlet)} Dirichlet"
    )
    return report

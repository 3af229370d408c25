"""Residual report for the relations tying R+, R-, zeta and G together on a WTState."""

import logging
from typing import Literal, Optional

import numpy as np
from pydantic import BaseModel, Field

from src.common.hyperbolic import mobius
from src.green.engine import WTState, _safe_green

logger = logging.getLogger(__name__)

IdentityKind = Literal["equality", "inequality", "bound"]


class IdentityResult(BaseModel):
    """One checked relation; for inequalities ``residual`` is the smallest slack."""

    name: str
    kind: IdentityKind
    residual: float
    tolerance: float
    passed: bool
    checked: int = 0


class IdentityReport(BaseModel):
    lam: float
    eta: float
    results: list[IdentityResult] = Field(default_factory=list)
    lower_bound_ratio: Optional[float] = None

    @property
    def passed(self) -> bool:
        return all(r.passed for r in self.results)

    def failures(self) -> list[IdentityResult]:
        return [r for r in self.results if not r.passed]

    def get(self, name: str) -> IdentityResult:
        for result in self.results:
            if result.name == name:
                return result
        raise KeyError(name)


def _relative(lhs, rhs) -> np.ndarray:
    lhs = np.asarray(lhs, dtype=complex)
    rhs = np.asarray(rhs, dtype=complex)
    scale = np.maximum(1.0, np.maximum(np.abs(lhs), np.abs(rhs)))
    return np.abs(lhs - rhs) / scale


def _equality(name: str, lhs, rhs, mask, tol: float) -> IdentityResult:
    mask = np.asarray(mask, dtype=bool) & np.isfinite(lhs) & np.isfinite(rhs)
    residual = float(np.max(_relative(lhs, rhs)[mask])) if mask.any() else 0.0
    return IdentityResult(
        name=name, kind="equality", residual=residual, tolerance=tol, passed=residual < tol, checked=int(mask.sum())
    )


def _slack(name: str, kind: IdentityKind, slack, mask, tol: float) -> IdentityResult:
    slack = np.asarray(slack, dtype=float)
    mask = np.asarray(mask, dtype=bool) & np.isfinite(slack)
    worst = float(np.min(slack[mask])) if mask.any() else 0.0
    return IdentityResult(name=name, kind=kind, residual=worst, tolerance=tol, passed=worst >= -tol, checked=int(mask.sum()))


def identity_suite(state: WTState, tol: float = 1e-8, slack_tol: float = 1e-10) -> IdentityReport:
    """Check every multiplier/WT relation on all edges of the state.

    Equalities report max relative residual |l - r|/max(1, |l|, |r|).
    The current relation Im R+(t) <= Im R+(o)/|zeta|^2 and the Herglotz
    minima report their smallest slack, which must not drop below
    ``-slack_tol``.
    """
    tree = state.tree
    edge = state.edge
    n = tree.size
    everywhere = np.ones(n, dtype=bool)
    has_children = tree.child_count > 0
    finite_terminus = np.isfinite(state.r_plus_terminus)

    g_terminus = state.diagonal()
    parent = tree.parent
    g_origin = np.where(parent < 0, state.origin_green(), g_terminus[np.maximum(parent, 0)])

    results = [
        _equality("zeta_wt", state.zeta, edge.C + state.r_plus_origin * edge.S, everywhere, tol),
        _equality("zeta_hat_wt", state.zeta_hat, edge.Sp + state.r_minus_terminus * edge.S, everywhere, tol),
        _equality("multiplicative", state.zeta * g_origin, state.zeta_hat * g_terminus, everywhere, tol),
    ]

    with np.errstate(divide="ignore", invalid="ignore"):
        results.append(
            _equality(
                "r_plus_terminus",
                state.r_plus_terminus,
                edge.Sp / edge.S - 1.0 / (edge.S * state.zeta),
                finite_terminus,
                tol,
            )
        )
        results.append(
            _equality(
                "r_minus_origin",
                state.r_minus_origin,
                edge.C / edge.S - 1.0 / (edge.S * state.zeta_hat),
                np.isfinite(state.r_minus_origin),
                tol,
            )
        )

        child_zeta = np.zeros(n, dtype=complex)
        child_cs = np.zeros(n, dtype=complex)
        below = np.arange(1, n)
        np.add.at(child_zeta, parent[below], state.zeta[below] / edge.S[below])
        np.add.at(child_cs, parent[below], edge.C[below] / edge.S[below])
        vertex_side = child_cs + edge.Sp / edge.S + tree.alpha
        results.append(
            _equality("vertex_sum", 1.0 / (edge.S * state.zeta) + child_zeta, vertex_side, has_children, tol)
        )
        results.append(
            _equality("zeta_inverse", 1.0 / state.zeta - state.zeta_hat, edge.S / g_terminus, finite_terminus, tol)
        )
        results.append(
            _equality("zeta_ratio", state.zeta_hat / state.zeta, g_origin / g_terminus, finite_terminus, tol)
        )
        results.append(
            _equality(
                "vertex_green_sum",
                vertex_side,
                child_zeta + state.zeta_hat / edge.S + 1.0 / g_terminus,
                has_children,
                tol,
            )
        )

    # G at each parent computed through every child edge leaving it
    through_child = _safe_green(state.r_plus_origin + state.r_minus_origin)
    results.append(_equality("origin_green", through_child, g_origin, everywhere, tol))

    reversed_edge = edge.reversed()
    r_minus_reversed = mobius(-reversed_edge.C, reversed_edge.Cp, reversed_edge.S, -reversed_edge.Sp, state.r_minus_origin)
    results.append(_equality("reversal", state.r_minus_terminus, r_minus_reversed, everywhere, tol))
    symmetric = np.array([tree.potentials[int(i)].is_symmetric for i in tree.potential_id])
    pulled = mobius(-edge.C, edge.Cp, edge.S, -edge.Sp, state.r_minus_origin)
    results.append(
        _equality(
            "symmetric_reversal",
            state.r_minus_terminus,
            pulled + (edge.C - edge.Sp) / edge.S,
            symmetric,
            tol,
        )
    )

    with np.errstate(divide="ignore", invalid="ignore"):
        current = state.r_plus_origin.imag / np.abs(state.zeta) ** 2 - state.r_plus_terminus.imag
    valid = finite_terminus & (np.abs(state.zeta) > 0)
    if state.z.eta == 0:
        current_result = _equality(
            "current", state.r_plus_origin.imag / np.abs(state.zeta) ** 2, state.r_plus_terminus.imag, valid, tol
        )
    else:
        current_result = _slack("current", "inequality", current, valid, slack_tol)
    results.append(current_result)

    green_bound = 1.0 / state.r_plus_origin.imag - np.abs(g_origin)
    results.append(_slack("green_bound", "bound", green_bound, state.r_plus_origin.imag > 0, slack_tol))

    lower_ratio = None
    if state.z.eta > 0:
        herglotz = np.concatenate(
            [
                state.r_plus_origin.imag,
                state.r_minus_terminus.imag,
                g_terminus.imag[finite_terminus],
                (edge.S * state.zeta).imag,
            ]
        )
        results.append(_slack("herglotz", "bound", herglotz, np.ones(len(herglotz), dtype=bool), 0.0))
        lower_ratio = float(np.min(state.r_plus_origin.imag) / state.z.eta)

    report = IdentityReport(lam=state.z.lam, eta=state.z.eta, results=results, lower_bound_ratio=lower_ratio)
    for failure in report.failures():
        logger.warning(f"Identity {failure.name} fails at z={state.z}: residual {failure.residual:.3e}")
    return report

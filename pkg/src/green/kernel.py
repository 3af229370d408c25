"""Green kernel G(x, y) at interior edge points and the imaginary part of <f, G f>."""

import logging
from dataclasses import dataclass
from typing import Callable, Union

import numpy as np
from numpy.polynomial.legendre import leggauss

from src.common.errors import QuadratureError
from src.edge.solutions import EdgeSolutionMatrix, edge_profile
from src.green.engine import WTState, vertex_green

logger = logging.getLogger(__name__)

GAUSS_NODES = 32
MAX_GAUSS_NODES = 4096

EdgeFunction = Union[Callable[[np.ndarray], np.ndarray], np.ndarray]


@dataclass(frozen=True)
class EdgePoint:
    """Point at distance ``x`` from the origin of the edge entering ``node``."""

    node: int
    x: float


def _edge_data(state: WTState, node: int):
    tree = state.tree
    if not 0 <= node < tree.size:
        raise ValueError(f"node {node} is not in the tree")
    potential = tree.potentials[int(tree.potential_id[node])]
    return potential, float(tree.length[node])


def _profile(state: WTState, node: int, xs) -> EdgeSolutionMatrix:
    potential, length = _edge_data(state, node)
    return edge_profile(potential, length, state.z, xs)


def edge_solutions(state: WTState, node: int, xs) -> tuple[np.ndarray, np.ndarray]:
    """phi+ = C + R+(o) S and phi- = C - R-(o) S on the edge entering ``node``."""
    prof = _profile(state, node, xs)
    phi_plus = prof.C + state.r_plus_origin[node] * prof.S
    phi_minus = prof.C - state.r_minus_origin[node] * prof.S
    return phi_plus, phi_minus


def _same_edge(state: WTState, node: int, x, y) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    lo, hi = np.minimum(x, y), np.maximum(x, y)
    _, phi_minus = edge_solutions(state, node, lo.ravel())
    phi_plus, _ = edge_solutions(state, node, hi.ravel())
    den = state.r_plus_origin[node] + state.r_minus_origin[node]
    return (-phi_minus * phi_plus / den).reshape(lo.shape)


def _interpolation_weights(state: WTState, node: int, x: float) -> tuple[complex, complex]:
    """Weights of G(o) and G(t) in a solution on the edge with those end values."""
    prof = _profile(state, node, [x])
    end = state.edge.take(node)
    u = (end.S * prof.C[0] - end.C * prof.S[0]) / end.S
    v = prof.S[0] / end.S
    return complex(u), complex(v)


def green_kernel(state: WTState, p: EdgePoint, q: EdgePoint) -> complex:
    """G(x, y) for points on tree edges.

    Points on one edge use the phi+/phi- product form; points on distinct
    edges interpolate the four vertex values G(a, c) between the edge ends.
    """
    if p.node == q.node:
        return complex(_same_edge(state, p.node, p.x, q.x))
    ends_p = (int(state.tree.parent[p.node]), p.node)
    ends_q = (int(state.tree.parent[q.node]), q.node)
    weights_p = _interpolation_weights(state, p.node, p.x)
    weights_q = _interpolation_weights(state, q.node, q.x)
    total = 0j
    for a, wa in zip(ends_p, weights_p):
        for c, wc in zip(ends_q, weights_q):
            if wa == 0 or wc == 0:
                continue
            total += wa * wc * vertex_green(state, a, c)
    return complex(total)


def _as_callable(f: EdgeFunction, length: float) -> Callable[[np.ndarray], np.ndarray]:
    if callable(f):
        return f
    samples = np.asarray(f)
    grid = np.linspace(0.0, length, len(samples))
    if np.iscomplexobj(samples):
        return lambda x: np.interp(x, grid, samples.real) + 1j * np.interp(x, grid, samples.imag)
    return lambda x: np.interp(x, grid, samples)


def _gauss(n: int, a: float, b: float) -> tuple[np.ndarray, np.ndarray]:
    nodes, weights = leggauss(n)
    half = 0.5 * (b - a)
    return half * nodes + 0.5 * (b + a), half * weights


def _projections(state: WTState, node: int, f, n: int) -> tuple[float, float]:
    """g+ and g- for one quadrature order."""
    _, length = _edge_data(state, node)
    xs, ws = _gauss(n, 0.0, length)
    fx = np.conj(f(xs))
    phi_plus, phi_minus = edge_solutions(state, node, xs)
    g_plus = abs(np.sum(ws * fx * phi_plus.real)) ** 2 + abs(np.sum(ws * fx * phi_plus.imag)) ** 2
    g_minus = abs(np.sum(ws * fx * phi_minus.real)) ** 2 + abs(np.sum(ws * fx * phi_minus.imag)) ** 2
    return float(g_plus), float(g_minus)


def im_quadratic_form(state: WTState, node: int, f: EdgeFunction, rtol: float = 1e-9) -> float:
    """Im <f, G f> for f supported on the edge entering ``node``.

    Evaluates (Im R+ g-_f + Im R- g+_f)/|R+ + R-|^2 at the edge origin, with
    g+-_f = |<f, Re phi+->|^2 + |<f, Im phi+->|^2. Quadrature starts at 32
    Gauss-Legendre nodes and doubles until two orders agree to ``rtol``.

    Raises:
        QuadratureError: If the node count exceeds 4096 before stabilising
    """
    _, length = _edge_data(state, node)
    f = _as_callable(f, length)
    r_plus = state.r_plus_origin[node]
    r_minus = state.r_minus_origin[node]
    scale = abs(r_plus + r_minus) ** 2

    def value(n: int) -> float:
        g_plus, g_minus = _projections(state, node, f, n)
        return (r_plus.imag * g_minus + r_minus.imag * g_plus) / scale

    n = GAUSS_NODES
    previous = value(n)
    while n < MAX_GAUSS_NODES:
        n *= 2
        current = value(n)
        if abs(current - previous) <= rtol * max(abs(current), 1e-300):
            return float(current)
        previous = current
    raise QuadratureError(f"quadratic form on node {node} did not stabilise with {MAX_GAUSS_NODES} nodes")


def kernel_quadratic_form(state: WTState, node: int, f: EdgeFunction, n: int = 64) -> complex:
    """<f, G f> by direct double quadrature of the kernel, split along x = y."""
    _, length = _edge_data(state, node)
    f = _as_callable(f, length)
    ys, wy = _gauss(n, 0.0, length)
    base, base_w = leggauss(n)
    total = 0j
    for y, w_outer in zip(ys, wy):
        # inner variable on [0, y], where x <= y
        xs = 0.5 * y * (base + 1.0)
        wx = 0.5 * y * base_w
        kernel = _same_edge(state, node, xs, np.full_like(xs, y))
        fy = f(np.array([y]))[0]
        fx = f(xs)
        total += w_outer * np.sum(wx * kernel * (np.conj(fx) * fy + np.conj(fy) * fx))
    return complex(total)


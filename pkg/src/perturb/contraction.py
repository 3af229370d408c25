"""Two-step contraction quantities, the expansion inequality and explicit hyperbolic bounds.

Values are normalised by sqrt(z): h = R+(o)/sqrt(z) on an edge and
g = R+(t)/sqrt(z) at its terminus. For a vertex * with children S_* and a
distinguished child *' with children S_{*'}, the two-step set is
S_{*,*'} = (S_* without *') followed by S_{*'}.
"""

import itertools
import logging
import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from pydantic import BaseModel

from src.common.hyperbolic import (
    cayley,
    disc_delta,
    disc_scaling_bound,
    gamma,
    inverse_cayley,
    mobius,
    shift_bound_constant,
)
from src.common.models import ConeSystem
from src.cone.solver import HerglotzVector
from src.graph.core import dominating_child

logger = logging.getLogger(__name__)

MAX_PERMUTATIONS = 5040


@dataclass(frozen=True)
class TwoStepSet:
    """Labels of S_* and S_{*'} for a vertex of label ``label``; ``prime`` indexes *' in S_*."""

    label: int
    first: np.ndarray
    prime: int
    second: np.ndarray

    @classmethod
    def from_system(cls, system: ConeSystem, label: int) -> "TwoStepSet":
        child = dominating_child(system, label)
        if child is None:
            raise ValueError(f"label {label} has no dominating child")
        M = system.matrix_array()
        first = np.repeat(np.arange(system.size), M[label])
        second = np.repeat(np.arange(system.size), M[child])
        prime = int(np.nonzero(first == child)[0][0])
        return cls(label=label, first=first, prime=prime, second=second)

    @property
    def prime_label(self) -> int:
        return int(self.first[self.prime])

    @property
    def rest(self) -> np.ndarray:
        """Positions of S_* other than *'."""
        return np.delete(np.arange(len(self.first)), self.prime)

    @property
    def combined(self) -> np.ndarray:
        """Labels of S_{*,*'}."""
        return np.concatenate([self.first[self.rest], self.second])

    def reference(self, vector: HerglotzVector) -> tuple[np.ndarray, np.ndarray]:
        """Unperturbed H on S_* and S_{*'} from a solved cone system."""
        H = vector.r_plus / np.sqrt(vector.z.z)
        return H[self.first], H[self.second]


def g_prime(g_second: np.ndarray, alpha: float, length: float, z: complex) -> complex:
    """h at *' from the values on its children, with W = 0 on the *' edge."""
    k = np.sqrt(complex(z))
    phi = -alpha / k + np.sum(g_second)
    c, s = np.cos(k * length), np.sin(k * length)
    return complex(mobius(c, s, -s, c, phi))


def cos_angles(h: np.ndarray, H: np.ndarray) -> np.ndarray:
    """cos of the angle between h_x - H_x and h_y - H_y; zero when either difference vanishes."""
    d = np.asarray(h, dtype=complex) - np.asarray(H, dtype=complex)
    norms = np.abs(d)
    num = (d[:, None] * np.conj(d[None, :])).real
    den = norms[:, None] * norms[None, :]
    with np.errstate(divide="ignore", invalid="ignore"):
        return np.where(den > 0, num / np.where(den > 0, den, 1.0), 0.0)


def q_matrix(h: np.ndarray, H: np.ndarray) -> np.ndarray:
    """Ratio of geometric to arithmetic mean of the weighted gammas; zero if either gamma is."""
    h = np.asarray(h, dtype=complex)
    H = np.asarray(H, dtype=complex)
    g = gamma(h, H)
    ih, iH = h.imag, H.imag
    num = np.sqrt(np.outer(ih * iH * g, ih * iH * g))
    den = 0.5 * (ih[:, None] * iH[None, :] * g[None, :] + ih[None, :] * iH[:, None] * g[:, None])
    positive = (g[:, None] > 0) & (g[None, :] > 0)
    with np.errstate(divide="ignore", invalid="ignore"):
        return np.where(positive, num / np.where(positive, den, 1.0), 0.0)


def _set_weights(h: np.ndarray, H: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    q = h.imag / np.sum(h.imag)
    Q = q_matrix(h, H)
    cos = cos_angles(h, H)
    c = (Q * cos) @ q
    return q, Q, cos, c


@dataclass(frozen=True)
class TwoStepWeights:
    """p_x, c_x and gamma_x on S_{*,*'} together with the per-set intermediates."""

    p: np.ndarray
    c: np.ndarray
    gamma: np.ndarray
    g_prime: complex
    q_first: np.ndarray
    q_second: np.ndarray
    Q_first: np.ndarray
    Q_second: np.ndarray
    cos_first: np.ndarray
    cos_second: np.ndarray

    @property
    def weighted_sum(self) -> float:
        """sum_x p_x c_x gamma_x."""
        return float(np.sum(self.p * self.c * self.gamma))


def two_step_weights(
    step: TwoStepSet,
    g_first: np.ndarray,
    g_second: np.ndarray,
    H_first: np.ndarray,
    H_second: np.ndarray,
    z: complex,
    alpha: float,
    length: float,
) -> TwoStepWeights:
    """Evaluate q, Q, cos, c and p for one configuration of children values.

    The entry of ``g_first`` at *' is replaced by the value pushed up from
    ``g_second`` through the *' edge.
    """
    g_first = np.asarray(g_first, dtype=complex)
    g_second = np.asarray(g_second, dtype=complex)
    H_first = np.asarray(H_first, dtype=complex)
    H_second = np.asarray(H_second, dtype=complex)
    prime_value = g_prime(g_second, alpha, length, z)
    h_first = g_first.copy()
    h_first[step.prime] = prime_value

    q1, Q1, cos1, c1 = _set_weights(h_first, H_first)
    q2, Q2, cos2, c2 = _set_weights(g_second, H_second)
    c2 = c1[step.prime] * c2

    p1 = H_first.imag / np.sum(H_first.imag)
    p2 = p1[step.prime] * H_second.imag / np.sum(H_second.imag)
    rest = step.rest
    return TwoStepWeights(
        p=np.concatenate([p1[rest], p2]),
        c=np.concatenate([c1[rest], c2]),
        gamma=np.concatenate([gamma(h_first[rest], H_first[rest]), gamma(g_second, H_second)]),
        g_prime=prime_value,
        q_first=q1,
        q_second=q2,
        Q_first=Q1,
        Q_second=Q2,
        cos_first=cos1,
        cos_second=cos2,
    )


def label_permutations(labels: np.ndarray, limit: int = MAX_PERMUTATIONS, seed: int = 0) -> list[np.ndarray]:
    """Permutations of positions that map each position to one with the same label.

    Enumerated exhaustively up to ``limit``, otherwise sampled with a seeded
    generator (the identity is always included).
    """
    labels = np.asarray(labels)
    groups = [np.nonzero(labels == lab)[0] for lab in np.unique(labels)]
    count = math.prod(math.factorial(len(g)) for g in groups)
    identity = np.arange(len(labels))
    if count <= limit:
        out = []
        for choice in itertools.product(*(itertools.permutations(g) for g in groups)):
            perm = identity.copy()
            for group, image in zip(groups, choice):
                perm[group] = image
            out.append(perm)
        return out
    logger.debug(f"{count} label-preserving permutations, sampling {limit}")
    rng = np.random.default_rng(seed)
    out = [identity]
    for _ in range(limit - 1):
        perm = identity.copy()
        for group in groups:
            perm[group] = rng.permutation(group)
        out.append(perm)
    return out


@dataclass(frozen=True)
class ContractionReport:
    """Contraction quantities at one configuration; kappa is NaN when every gamma vanishes."""

    weights: TwoStepWeights
    kappa: float
    n_permutations: int
    power: float = 2.0
    permuted_sums: np.ndarray = field(default_factory=lambda: np.empty(0), repr=False)


def contraction_diagnostics(
    step: TwoStepSet,
    g_first: np.ndarray,
    g_second: np.ndarray,
    H_first: np.ndarray,
    H_second: np.ndarray,
    z: complex,
    alpha: float,
    length: float,
    p: float = 2.0,
    max_permutations: int = MAX_PERMUTATIONS,
) -> ContractionReport:
    """Weights at the given configuration and the permutation-averaged contraction coefficient.

    kappa = sum_pi |sum_x p_x c_x^pi gamma_x^pi|^p / sum_pi sum_x p_x (gamma_x^pi)^p,
    where pi permutes the children values among positions of equal label
    in S_{*,*'} while H stays fixed.
    """
    g_first = np.asarray(g_first, dtype=complex)
    g_second = np.asarray(g_second, dtype=complex)
    for name, values in (("g_first", g_first), ("g_second", g_second), ("H_first", H_first), ("H_second", H_second)):
        if not np.all(np.asarray(values).imag > 0):
            raise ValueError(f"{name} must lie in the upper half-plane")

    weights = two_step_weights(step, g_first, g_second, H_first, H_second, z, alpha, length)
    rest = step.rest
    combined = np.concatenate([g_first[rest], g_second])
    n_rest = len(rest)
    numerators, denominators = [], []
    for perm in label_permutations(step.combined, max_permutations):
        moved = combined[perm]
        permuted_first = g_first.copy()
        permuted_first[rest] = moved[:n_rest]
        w = two_step_weights(step, permuted_first, moved[n_rest:], H_first, H_second, z, alpha, length)
        numerators.append(abs(np.sum(w.p * w.c * w.gamma)) ** p)
        denominators.append(np.sum(w.p * w.gamma**p))
    total = float(np.sum(denominators))
    kappa = float(np.sum(numerators)) / total if total > 0 else float("nan")
    return ContractionReport(
        weights=weights,
        kappa=kappa,
        n_permutations=len(numerators),
        power=p,
        permuted_sums=np.asarray(numerators),
    )


class BoundCheck(BaseModel):
    """Random check of an explicit inequality; ``max_ratio`` is the worst lhs/rhs."""

    name: str
    n_checked: int
    violations: int
    max_ratio: float

    @property
    def passed(self) -> bool:
        return self.violations == 0


def _disc_points(rng: np.random.Generator, n: int, radius: float) -> np.ndarray:
    r = radius * np.sqrt(rng.random(n))
    return r * np.exp(2j * np.pi * rng.random(n))


def disc_scaling_check(n: int = 100_000, r_k: float = 0.9, seed: int = 0, rtol: float = 1e-9) -> BoundCheck:
    """delta(l1 z, l2 w) <= (|l1|^2 + C_K) delta(z, w) + C_K for z in |z| <= r_K, w in the disc, |l_i| <= 1."""
    rng = np.random.default_rng(seed)
    z = _disc_points(rng, n, r_k)
    w = _disc_points(rng, n, 0.999)
    lam1 = _disc_points(rng, n, 1.0)
    lam2 = np.where(rng.random(n) < 0.25, lam1, _disc_points(rng, n, 1.0))
    lhs = disc_delta(lam1 * z, lam2 * w)
    rhs = np.array([disc_scaling_bound(d, a, b, r_k) for d, a, b in zip(disc_delta(z, w), lam1, lam2)])
    ratio = np.where(rhs > 0, lhs / np.where(rhs > 0, rhs, 1.0), np.where(lhs > 0, np.inf, 0.0))
    violations = int(np.sum(lhs > rhs * (1 + rtol) + 1e-300))
    return BoundCheck(name="disc_scaling", n_checked=n, violations=violations, max_ratio=float(np.max(ratio)))


def _upper_half_points(rng: np.random.Generator, n: int) -> np.ndarray:
    return rng.normal(scale=3.0, size=n) + 1j * np.exp(rng.normal(scale=1.5, size=n))


def shift_bound_check(n: int = 100_000, seed: int = 0, rtol: float = 1e-9) -> BoundCheck:
    """max{gamma(g, h + w), gamma(g + w, h)} <= (1 + c_g(w)) gamma(g, h) + c_g(w) for Im w >= 0."""
    rng = np.random.default_rng(seed)
    g = _upper_half_points(rng, n)
    h = _upper_half_points(rng, n)
    w = rng.normal(scale=1.0, size=n) + 1j * np.abs(rng.normal(scale=1.0, size=n))
    w = np.where(rng.random(n) < 0.05, 0.0, w)
    lhs = np.maximum(gamma(g, h + w), gamma(g + w, h))
    c = np.array([shift_bound_constant(gi, wi) for gi, wi in zip(g, w)])
    rhs = (1 + c) * gamma(g, h) + c
    ratio = np.where(rhs > 0, lhs / np.where(rhs > 0, rhs, 1.0), 1.0)
    violations = int(np.sum(lhs > rhs * (1 + rtol) + 1e-12))
    return BoundCheck(name="shift_bound", n_checked=n, violations=violations, max_ratio=float(np.max(ratio)))


def gamma_disc_residual(g, h) -> float:
    """Largest relative gap between gamma(g, h) and 2 delta(C g, C h)."""
    direct = gamma(g, h)
    through_disc = 2.0 * disc_delta(cayley(g), cayley(h))
    scale = np.maximum(np.abs(direct), 1e-300)
    mask = direct > 0
    if not mask.any():
        return float(np.max(np.abs(through_disc)))
    return float(np.max(np.abs(direct - through_disc)[mask] / scale[mask]))


def cayley_rotation_residual(state) -> float:
    """Max |C(g) - exp(-2i sqrt(z) L) C(h)| over edges of a potential-free WTState."""
    k = np.sqrt(state.z.z)
    g = state.r_plus_terminus / k
    h = state.r_plus_origin / k
    finite = np.isfinite(g) & np.isfinite(h)
    rotated = np.exp(-2j * k * state.tree.length) * cayley(h)
    return float(np.max(np.abs(cayley(g) - rotated)[finite])) if finite.any() else 0.0


@dataclass(frozen=True)
class TwoStepSamples:
    """Per-sample gamma at * and the two-step weights on S_{*,*'}."""

    gamma_star: np.ndarray
    p: np.ndarray
    c: np.ndarray
    gamma: np.ndarray

    @property
    def weighted_sums(self) -> np.ndarray:
        return np.sum(self.p * self.c * self.gamma, axis=1)

    def __len__(self) -> int:
        return len(self.gamma_star)


class ExpansionReport(BaseModel):
    """Slack of gamma_* <= (1 + C) sum p c gamma + C with C fitted to the samples."""

    n_samples: int
    fitted_constant: float
    min_slack: float
    holds_without_constant: bool
    bounds: list[BoundCheck] = []


def fit_expansion_constant(samples: TwoStepSamples, tol: float = 1e-10) -> float:
    """Smallest C >= 0 for which every sample satisfies the expansion inequality."""
    s = samples.weighted_sums
    excess = samples.gamma_star - s
    needed = np.where(
        excess <= tol,
        0.0,
        np.where(1.0 + s > 0, excess / np.where(1.0 + s > 0, 1.0 + s, 1.0), np.inf),
    )
    return float(max(0.0, np.max(needed))) if len(needed) else 0.0


def expansion_inequality_check(
    samples: TwoStepSamples,
    n_random: int = 100_000,
    seed: int = 0,
    r_k: float = 0.9,
    tol: float = 1e-10,
) -> ExpansionReport:
    """Fit the expansion constant and run the explicit disc and shift bounds on random inputs."""
    constant = fit_expansion_constant(samples, tol)
    s = samples.weighted_sums
    slack = (1 + constant) * s + constant - samples.gamma_star if np.isfinite(constant) else np.full(len(s), np.inf)
    bounds = []
    if n_random > 0:
        bounds = [disc_scaling_check(n_random, r_k, seed), shift_bound_check(n_random, seed)]
    report = ExpansionReport(
        n_samples=len(samples),
        fitted_constant=constant,
        min_slack=float(np.min(slack)) if len(slack) else 0.0,
        holds_without_constant=bool(np.all(samples.gamma_star <= s + tol)),
        bounds=bounds,
    )
    logger.info(f"Expansion inequality over {report.n_samples} samples: fitted C={constant:.3e}")
    for bound in bounds:
        if not bound.passed:
            logger.warning(f"Bound {bound.name} violated on {bound.violations} of {bound.n_checked} inputs")
    return report


class KappaSurvey(BaseModel):
    """Largest contraction coefficient over random configurations outside a gamma-ball."""

    n_draws: int
    n_accepted: int
    radius: float
    max_kappa: float
    delta: float
    worst_draw: Optional[dict] = None


def sample_kappa(
    step: TwoStepSet,
    H_first: np.ndarray,
    H_second: np.ndarray,
    z: complex,
    alpha0: float,
    length0: float,
    eps: float,
    radius: float,
    p: float = 2.0,
    n_draws: int = 10_000,
    seed: int = 0,
    spread: float = 1.0,
) -> KappaSurvey:
    """Draw children values with max_x gamma(g_x, H_x) >= radius and the *' edge data in the eps box.

    Children values are H rotated through the disc: C(g) = C(H) + r e^{i t}
    with r chosen so that the point stays inside the disc.
    """
    rng = np.random.default_rng(seed)
    H_all = np.concatenate([np.asarray(H_first, dtype=complex), np.asarray(H_second, dtype=complex)])
    centre = cayley(H_all)
    n_first = len(H_first)
    worst, worst_draw, accepted = -np.inf, None, 0
    for _ in range(n_draws):
        room = 1.0 - np.abs(centre)
        step_size = room * (1.0 - np.exp(-spread * rng.exponential(size=len(centre))))
        moved = centre + step_size * np.exp(2j * np.pi * rng.random(len(centre)))
        g = inverse_cayley(moved)
        if not np.all(g.imag > 0) or np.max(gamma(g, H_all)) < radius:
            continue
        accepted += 1
        alpha = max(0.0, alpha0 - eps) + (alpha0 + eps - max(0.0, alpha0 - eps)) * rng.random()
        length = length0 - eps + 2 * eps * rng.random()
        report = contraction_diagnostics(step, g[:n_first], g[n_first:], H_first, H_second, z, alpha, length, p)
        if np.isfinite(report.kappa) and report.kappa > worst:
            worst = report.kappa
            worst_draw = {
                "g": [[float(v.real), float(v.imag)] for v in g],
                "alpha": alpha,
                "length": length,
                "kappa": report.kappa,
            }
    max_kappa = float(worst) if accepted and np.isfinite(worst) else float("nan")
    survey = KappaSurvey(
        n_draws=n_draws,
        n_accepted=accepted,
        radius=radius,
        max_kappa=max_kappa,
        delta=1.0 - max_kappa,
        worst_draw=worst_draw,
    )
    logger.info(f"kappa survey: {accepted}/{n_draws} draws outside radius {radius:g}, max kappa={max_kappa:.6f}")
    if worst_draw is not None:
        logger.info(f"Smallest slack at alpha={worst_draw['alpha']:.6g}, L={worst_draw['length']:.6g}")
    return survey

"""Monte Carlo estimates over random trees: gamma continuity, inverse moments, tail distributions.

Samples are shallow probes (the root edge and its first generations) of
WT recursions on randomly perturbed truncated trees, seeded at the leaves
with the unperturbed cone values. The reference H comes from the same
recursion on the unperturbed tree.
"""

import logging
from dataclasses import dataclass
from functools import cached_property, partial
from typing import Optional, Sequence

import numpy as np
from pydantic import BaseModel, Field

from src.common.errors import DirichletProximityError
from src.common.hyperbolic import euclidean_bound, gamma
from src.common.models import ConeSystem, EnsembleConfig
from src.common.parallel import map_chunks
from src.common.settings import DEFAULT
from src.cone.solver import perron_weights, solve_cone_system
from src.edge.solutions import ComplexEnergy, EnergyLike, thickened_dirichlet
from src.graph.core import dominating_child
from src.graph.tree import TruncatedQuantumTree, expand_truncated_tree
from src.green.engine import BoundaryRule, WTState, wt_recursion
from src.perturb.contraction import TwoStepSamples, TwoStepSet, gamma_disc_residual, two_step_weights
from src.perturb.ensemble import check_ensemble, sample_random_tree

logger = logging.getLogger(__name__)

PROBE_FIELDS = ("r_plus", "r_plus_terminus", "zeta", "S", "C", "length", "alpha")


@dataclass(frozen=True)
class SampleJob:
    """Everything a worker needs to draw and solve a range of samples."""

    system: ConeSystem
    config: EnsembleConfig
    depth: int
    z: complex
    boundary_values: np.ndarray
    n_probes: int


def _sample_chunk(job: SampleJob, start: int, stop: int) -> dict[str, np.ndarray]:
    base = expand_truncated_tree(job.system, job.depth)
    boundary = BoundaryRule(kind="cone", values=job.boundary_values)
    probes = slice(0, job.n_probes)
    out: dict[str, list] = {name: [] for name in PROBE_FIELDS}
    for sample in range(start, stop):
        tree = sample_random_tree(job.system, job.config, job.depth, sample, base=base)
        state = wt_recursion(tree, job.z, boundary)
        out["r_plus"].append(state.r_plus_origin[probes])
        out["r_plus_terminus"].append(state.r_plus_terminus[probes])
        out["zeta"].append(state.zeta[probes])
        out["S"].append(state.edge.S[probes])
        out["C"].append(state.edge.C[probes])
        out["length"].append(tree.length[probes])
        out["alpha"].append(tree.alpha[probes])
    logger.debug(f"Samples {start}..{stop - 1} done")
    return {name: np.asarray(values) for name, values in out.items()}


@dataclass(frozen=True)
class SampleBatch:
    """Probe values of n random trees, arrays shaped (n_samples, n_probes)."""

    z: ComplexEnergy
    config: EnsembleConfig
    tree: TruncatedQuantumTree
    reference: WTState
    r_plus: np.ndarray
    r_plus_terminus: np.ndarray
    zeta: np.ndarray
    S: np.ndarray
    C: np.ndarray
    length: np.ndarray
    alpha: np.ndarray

    @property
    def n_samples(self) -> int:
        return self.r_plus.shape[0]

    @property
    def n_probes(self) -> int:
        return self.r_plus.shape[1]

    @property
    def sqrt_z(self) -> complex:
        return self.z.sqrt

    @property
    def labels(self) -> np.ndarray:
        return self.tree.label[: self.n_probes]

    @property
    def h(self) -> np.ndarray:
        return self.r_plus / self.sqrt_z

    @property
    def g(self) -> np.ndarray:
        return self.r_plus_terminus / self.sqrt_z

    @property
    def H(self) -> np.ndarray:
        return self.reference.r_plus_origin[: self.n_probes] / self.sqrt_z

    @cached_property
    def gamma(self) -> np.ndarray:
        return gamma(self.h, self.H[np.newaxis, :])

    def columns(self, label: int) -> np.ndarray:
        return np.nonzero(self.labels == label)[0]

    def per_sample(self, values: np.ndarray, label: int) -> np.ndarray:
        """Mean over the probes of one label, one value per sample."""
        cols = self.columns(label)
        return values[:, cols].mean(axis=1)

    @property
    def present_labels(self) -> list[int]:
        return [int(j) for j in np.unique(self.labels)]


def check_energy_guard(system: ConeSystem, eps: float, lam: float, guard: Optional[float] = None) -> None:
    """Raise DirichletProximityError when lam meets the eps-thickened Dirichlet set."""
    guard = DEFAULT.dirichlet_guard if guard is None else guard
    for lo, hi in thickened_dirichlet(system, eps, lam + 1.0):
        if lo - guard <= lam <= hi + guard:
            raise DirichletProximityError(lam, float(np.clip(lam, lo, hi)), guard)


def collect_samples(
    system: ConeSystem,
    config: EnsembleConfig,
    z: EnergyLike,
    depth: int = 8,
    n_samples: int = 1000,
    probe_depth: int = 2,
    workers: int = 1,
    chunk_size: int = 64,
) -> SampleBatch:
    """Solve ``n_samples`` random trees at z and keep the probes down to ``probe_depth``.

    Sample i always uses sample index i of the ensemble stream, so the
    output does not depend on ``workers``.
    """
    energy = ComplexEnergy.of(z)
    if energy.eta <= 0:
        raise ValueError("Monte Carlo estimates need Im z > 0")
    if not 1 <= probe_depth <= depth:
        raise ValueError(f"probe_depth must lie in [1, depth], got {probe_depth}")
    if n_samples < 1:
        raise ValueError("n_samples must be positive")
    check_ensemble(system, config)
    check_energy_guard(system, config.eps, energy.lam)

    base = expand_truncated_tree(system, depth)
    boundary = BoundaryRule.cone(system, energy)
    reference = wt_recursion(base, energy, boundary)
    n_probes = int(base.level_start[probe_depth + 1])
    job = SampleJob(system, config, depth, energy.z, boundary.values, n_probes)
    chunks = map_chunks(partial(_sample_chunk, job), n_samples, workers, chunk_size)
    arrays = {name: np.concatenate([chunk[name] for chunk in chunks]) for name in PROBE_FIELDS}
    logger.info(
        f"Collected {n_samples} samples at z={energy} (eps={config.eps:g}, {config.family}, depth {depth}) "
        f"in {len(chunks)} chunks"
    )
    return SampleBatch(z=energy, config=config, tree=base, reference=reference, **arrays)


class LabelMoment(BaseModel):
    """Moments for one label; errors are standard errors over samples."""

    label: int
    probes: int
    mean_gamma: float
    stderr_gamma: float
    mean_abs_diff: float
    stderr_abs_diff: float
    mean_im_product: float


class GammaStatistics(BaseModel):
    lam: float
    eta: float
    eps: float
    p: float
    n_samples: int
    labels: list[LabelMoment] = Field(default_factory=list)
    max_gamma_moment: float = 0.0
    perron_weighted: Optional[float] = None
    cauchy_schwarz_slack: float = 0.0
    euclidean_violations: int = 0
    gamma_disc_residual: float = 0.0
    vertex_relation_residual: float = 0.0


def _stderr(values: np.ndarray) -> float:
    if len(values) < 2:
        return 0.0
    return float(np.std(values, ddof=1) / np.sqrt(len(values)))


def gamma_statistics(
    system: ConeSystem,
    config: EnsembleConfig,
    z: EnergyLike,
    depth: int = 8,
    n_samples: int = 1000,
    p: float = 2.0,
    workers: int = 1,
    batch: Optional[SampleBatch] = None,
) -> GammaStatistics:
    """E[gamma(h, H)^p] and E[|h - H|^p] per label, with the companion checks.

    The Cauchy-Schwarz slack is min over labels of
    E[gamma^p] E[(Im h Im H)^p] - E[|h - H|^p]^2 and is never negative.
    """
    batch = batch or collect_samples(system, config, z, depth, n_samples, workers=workers)
    h, H = batch.h, batch.H[np.newaxis, :]
    gam = batch.gamma
    diff = np.abs(h - H) ** p
    im_product = (h.imag * H.imag) ** p

    moments, slacks = [], []
    for label in batch.present_labels:
        cols = batch.columns(label)
        g_p = gam[:, cols] ** p
        per_gamma = g_p.mean(axis=1)
        per_diff = diff[:, cols].mean(axis=1)
        e_gamma, e_diff, e_prod = float(g_p.mean()), float(diff[:, cols].mean()), float(im_product[:, cols].mean())
        moments.append(
            LabelMoment(
                label=label,
                probes=len(cols),
                mean_gamma=e_gamma,
                stderr_gamma=_stderr(per_gamma),
                mean_abs_diff=e_diff,
                stderr_abs_diff=_stderr(per_diff),
                mean_im_product=e_prod,
            )
        )
        slacks.append(e_gamma * e_prod - e_diff**2)

    perron = None
    vector = solve_cone_system(system, batch.z)
    if all(dominating_child(system, j) is not None for j in range(system.size)):
        _, weights = perron_weights(system, vector)
        by_label = {m.label: m.mean_gamma for m in moments}
        perron = float(sum(weights[j] * by_label.get(j, 0.0) for j in range(system.size)))

    bound = euclidean_bound(h, H)
    violations = int(np.sum(np.abs(h) > bound * (1 + 1e-12)))

    children = batch.tree.children(0)
    sqrt_z = batch.sqrt_z
    lhs = h[:, children].sum(axis=1)
    rhs = batch.g[:, 0] + batch.alpha[:, 0] / sqrt_z
    vertex_residual = float(np.max(np.abs(lhs - rhs) / np.maximum(1.0, np.abs(rhs))))

    stats = GammaStatistics(
        lam=batch.z.lam,
        eta=batch.z.eta,
        eps=batch.config.eps,
        p=p,
        n_samples=batch.n_samples,
        labels=moments,
        max_gamma_moment=max(m.mean_gamma for m in moments),
        perron_weighted=perron,
        cauchy_schwarz_slack=float(min(slacks)),
        euclidean_violations=violations,
        gamma_disc_residual=gamma_disc_residual(h, np.broadcast_to(H, h.shape)),
        vertex_relation_residual=vertex_residual,
    )
    logger.info(
        f"E[gamma^{p:g}] at eps={stats.eps:g}, z={batch.z}: {stats.max_gamma_moment:.4e} (max over labels)"
    )
    if violations:
        logger.warning(f"{violations} samples exceed the Euclidean bound |h| <= 4 gamma Im H + 2|H|")
    return stats


def bootstrap_interval(
    values: np.ndarray,
    n_boot: int = 1000,
    seed: int = 0,
    level: float = 0.95,
) -> tuple[float, float]:
    """Percentile bootstrap interval for the mean, resampling with a seeded generator."""
    values = np.asarray(values, dtype=float)
    if len(values) == 0:
        return float("nan"), float("nan")
    rng = np.random.default_rng(seed)
    index = rng.integers(0, len(values), size=(n_boot, len(values)))
    means = values[index].mean(axis=1)
    tail = 0.5 * (1.0 - level) * 100.0
    lo, hi = np.percentile(means, [tail, 100.0 - tail])
    return float(lo), float(hi)


class MomentRow(BaseModel):
    """Inverse and absolute moments at one energy, maximised over labels."""

    lam: float
    eta: float
    label: int
    inverse_moment: float
    ci_low: float
    ci_high: float
    abs_moment: float
    abs_inverse_moment: float
    zeta_moment: float
    zeta_bound: float
    r_plus_moment: float
    r_plus_bound: float

    @property
    def chain_holds(self) -> bool:
        return self.zeta_moment <= self.zeta_bound * (1 + 1e-9) and self.r_plus_moment <= self.r_plus_bound * (1 + 1e-9)


class InverseMoments(BaseModel):
    s: float
    p: float
    eps: float
    rows: list[MomentRow] = Field(default_factory=list)

    @property
    def supremum(self) -> float:
        return max(row.inverse_moment for row in self.rows)


def moment_row(batch: SampleBatch, s: float, p: float, n_boot: int, seed: int) -> MomentRow:
    im = batch.r_plus.imag
    inverse = np.abs(im) ** (-s)
    best_label, best_values = None, None
    for label in batch.present_labels:
        per = batch.per_sample(inverse, label)
        if best_values is None or per.mean() > best_values.mean():
            best_label, best_values = label, per
    lo, hi = bootstrap_interval(best_values, n_boot, seed)

    abs_r = np.abs(batch.r_plus)
    abs_moment = max(float(batch.per_sample(abs_r**p, j).mean()) for j in batch.present_labels)
    abs_inverse = max(float(batch.per_sample(abs_r ** (-p), j).mean()) for j in batch.present_labels)

    children = batch.tree.children(0)
    c1 = float(np.min(np.abs(batch.S[:, 0])))
    c3 = float(np.max(np.abs(batch.C[:, 0])))
    children_inverse = float(np.sum(np.mean(np.abs(im[:, children]) ** (-p), axis=0)))
    zeta_bound = c1 ** (-p) * children_inverse
    return MomentRow(
        lam=batch.z.lam,
        eta=batch.z.eta,
        label=best_label,
        inverse_moment=float(best_values.mean()),
        ci_low=lo,
        ci_high=hi,
        abs_moment=abs_moment,
        abs_inverse_moment=abs_inverse,
        zeta_moment=float(np.mean(np.abs(batch.zeta[:, 0]) ** p)),
        zeta_bound=zeta_bound,
        r_plus_moment=float(np.mean(abs_r[:, 0] ** p)),
        r_plus_bound=c1 ** (-p) * 2 ** (p - 1) * (zeta_bound + c3**p),
    )


def inverse_moments(
    system: ConeSystem,
    config: EnsembleConfig,
    z_grid: Sequence[EnergyLike],
    depth: int = 8,
    n_samples: int = 1000,
    s: float = 2.0,
    p: float = 2.0,
    n_boot: int = 1000,
    workers: int = 1,
) -> InverseMoments:
    """E[|Im R+|^-s] per energy with bootstrap intervals, plus E[|R+|^{+-p}] and the zeta chain bound."""
    if len(z_grid) == 0:
        raise ValueError("z_grid must not be empty")
    rows = []
    for z in z_grid:
        batch = collect_samples(system, config, z, depth, n_samples, workers=workers)
        rows.append(moment_row(batch, s, p, n_boot, config.seed))
    result = InverseMoments(s=s, p=p, eps=config.eps, rows=rows)
    logger.info(f"sup E[|Im R+|^-{s:g}] over {len(rows)} energies: {result.supremum:.4e}")
    for row in rows:
        if not row.chain_holds:
            logger.warning(f"Moment chain bound fails at lam={row.lam:g}, eta={row.eta:g}")
    return result


def _ecdf(values: np.ndarray):
    ordered = np.sort(np.asarray(values, dtype=float).ravel())

    def cdf(x):
        return np.searchsorted(ordered, np.asarray(x, dtype=float), side="right") / len(ordered)

    return cdf


class Distribution(BaseModel):
    """Empirical CDF per label on ``x`` and its maximum over labels."""

    x: list[float]
    per_label: dict[int, list[float]]
    maximum: list[float]

    @property
    def monotone(self) -> bool:
        return bool(np.all(np.diff(self.maximum) >= 0))


def _distribution(batch: SampleBatch, values: np.ndarray, x_grid: Sequence[float]) -> Distribution:
    x = np.asarray(x_grid, dtype=float)
    per_label = {label: _ecdf(values[:, batch.columns(label)])(x) for label in batch.present_labels}
    maximum = np.max(np.vstack(list(per_label.values())), axis=0)
    return Distribution(
        x=[float(v) for v in x],
        per_label={label: [float(v) for v in cdf] for label, cdf in per_label.items()},
        maximum=[float(v) for v in maximum],
    )


def zeta_distribution(batch: SampleBatch, x_grid: Sequence[float]) -> Distribution:
    """P(|zeta_j| <= x) per label."""
    return _distribution(batch, np.abs(batch.zeta), x_grid)


def edge_constants(system: ConeSystem, eps: float, z: EnergyLike, n_lengths: int = 33) -> tuple[float, float, float]:
    """c1 <= |S_z(L)| <= c2 and |C_z(L)| <= c3 over lengths within eps of every label length."""
    k = ComplexEnergy.of(z).sqrt
    nominal = np.asarray(list(system.lengths) + [system.edge_length_of_root])
    lengths = (nominal[:, None] + np.linspace(-eps, eps, n_lengths)[None, :]).ravel()
    S = np.abs(np.sin(k * lengths) / k)
    C = np.abs(np.cos(k * lengths))
    return float(S.min()), float(S.max()), float(C.max())


class FDistribution(BaseModel):
    """F_z(x) = max_j P(Im R+(j) <= x) with its small-x power fit and the tail recursion constant."""

    distribution: Distribution
    kappa: Optional[float] = None
    fit_constant: Optional[float] = None
    fit_points: int = 0
    recursion_constant: Optional[float] = None

    @property
    def F(self) -> list[float]:
        return self.distribution.maximum


def _power_fit(x: np.ndarray, F: np.ndarray, fraction: float) -> tuple[Optional[float], Optional[float], int]:
    cut = max(2, int(np.ceil(fraction * len(x))))
    keep = (F[:cut] > 0) & (x[:cut] > 0)
    if keep.sum() < 2 or len(np.unique(F[:cut][keep])) < 2:
        return None, None, int(keep.sum())
    slope, intercept = np.polyfit(np.log(x[:cut][keep]), np.log(F[:cut][keep]), 1)
    return float(slope), float(np.exp(intercept)), int(keep.sum())


def tail_recursion_constant(
    F,
    system: ConeSystem,
    edge: tuple[float, float, float],
    x_grid: np.ndarray,
    y_grid: np.ndarray,
    beta: float,
    varsigma: float,
) -> float:
    """Smallest C with F(x) <= F(x/y^2)^q + C (y^beta F(4 Q c2 y/c1^2)^q + y^varsigma) on the grid."""
    c1, c2, _ = edge
    rows = system.row_sums()
    q, Q = int(rows.min()), int(rows.max())
    needed = 0.0
    for y in y_grid:
        for x in x_grid:
            gap = F(x) - F(x / y**2) ** q
            if gap <= 0:
                continue
            scale = y**beta * F(4 * Q * c2 * y / c1**2) ** q + y**varsigma
            needed = max(needed, float(gap / scale))
    return needed


def f_distribution(
    system: ConeSystem,
    config: EnsembleConfig,
    z: EnergyLike,
    x_grid: Sequence[float],
    depth: int = 8,
    n_samples: int = 1000,
    workers: int = 1,
    batch: Optional[SampleBatch] = None,
    fit_fraction: float = 0.5,
    y_grid: Optional[Sequence[float]] = None,
    varsigma: float = 1.0,
) -> FDistribution:
    """Empirical tail F_z(x) with a power-law fit on the smallest ``fit_fraction`` of x."""
    x = np.asarray(x_grid, dtype=float)
    if len(x) < 2 or np.any(x <= 0) or np.any(np.diff(x) <= 0):
        raise ValueError("x_grid must be positive and strictly increasing with at least two points")
    batch = batch or collect_samples(system, config, z, depth, n_samples, workers=workers)
    distribution = _distribution(batch, batch.r_plus.imag, x)
    F_values = np.asarray(distribution.maximum)
    kappa, constant, n_fit = _power_fit(x, F_values, fit_fraction)

    im_by_label = [batch.r_plus.imag[:, batch.columns(j)] for j in batch.present_labels]
    cdfs = [_ecdf(values) for values in im_by_label]

    def F(t):
        return max(float(cdf(t)) for cdf in cdfs)

    edge = edge_constants(system, config.eps, batch.z)
    c1, c2, c3 = edge
    Q = int(system.row_sums().max())
    c_i = c1 / (4 * Q * c2 * c3)
    ys = np.asarray(y_grid, dtype=float) if y_grid is not None else c_i * np.geomspace(0.1, 1.0, 8)
    beta = config.beta if config.family == "beta" else 1.0
    recursion = tail_recursion_constant(F, system, edge, x, ys, beta, varsigma)

    result = FDistribution(
        distribution=distribution,
        kappa=kappa,
        fit_constant=constant,
        fit_points=n_fit,
        recursion_constant=recursion,
    )
    if kappa is not None:
        logger.info(f"F_z(x) <= {constant:.3e} x^{kappa:.3f} on the {n_fit} smallest grid points")
    return result


class MembershipReport(BaseModel):
    """P(Im R+(j) > delta) per label and whether all exceed delta."""

    delta: float
    probabilities: dict[int, float]

    @property
    def member(self) -> bool:
        return all(prob > self.delta for prob in self.probabilities.values())


def sigma_ac_membership(batch: SampleBatch, delta: float) -> MembershipReport:
    if not delta > 0:
        raise ValueError("delta must be positive")
    im = batch.r_plus.imag
    probabilities = {label: float(np.mean(im[:, batch.columns(label)] > delta)) for label in batch.present_labels}
    return MembershipReport(delta=delta, probabilities=probabilities)


def two_step_samples(batch: SampleBatch, system: ConeSystem) -> TwoStepSamples:
    """gamma at the root vertex and the two-step weights of its children, per sample."""
    tree = batch.tree
    if tree.max_depth < 2 or batch.n_probes < int(tree.level_start[3]):
        raise ValueError("two-step samples need probes down to depth 2")
    step = TwoStepSet.from_system(system, int(tree.label[0]))
    first = tree.children(0)
    prime_node = int(first[step.prime])
    second = tree.children(prime_node)
    H = batch.H
    h = batch.h
    z = batch.z.z
    gamma_star, ps, cs, gammas = [], [], [], []
    for i in range(batch.n_samples):
        w = two_step_weights(
            step,
            h[i, first],
            h[i, second],
            H[first],
            H[second],
            z,
            float(batch.alpha[i, prime_node]),
            float(batch.length[i, prime_node]),
        )
        gamma_star.append(float(gamma(h[i, 0], H[0])))
        ps.append(w.p)
        cs.append(w.c)
        gammas.append(w.gamma)
    return TwoStepSamples(
        gamma_star=np.asarray(gamma_star),
        p=np.asarray(ps),
        c=np.asarray(cs),
        gamma=np.asarray(gammas),
    )


class StabilityConstants(BaseModel):
    """Constants of the unperturbed model on I + i[0, 1]; eps_star is diagnostic, not a certified bound."""

    theta0: float
    varsigma0: float
    varsigma1: float
    eps_d: float
    c_i: float
    c_i_prime: float
    eps_star: float
    m_const: float

    def theta(self, eps: float) -> float:
        return (1 + self.theta0) / self.theta0 * self.m_const * eps

    def radius(self, eps: float) -> float:
        """R(eps) = theta_eps^2/(varsigma0 (varsigma0 - theta_eps)); inf once theta_eps >= varsigma0."""
        t = self.theta(eps)
        if t >= self.varsigma0:
            return float("inf")
        return t**2 / (self.varsigma0 * (self.varsigma0 - t))


def stability_constants(
    system: ConeSystem,
    interval: tuple[float, float],
    n_lam: int = 11,
    etas: Sequence[float] = (0.0, 0.25, 0.5, 0.75, 1.0),
) -> StabilityConstants:
    """Minimal angle, Im H and |Gamma| extremes, Dirichlet avoidance and Lipschitz constants on a grid."""
    lo, hi = interval
    if not lo < hi:
        raise ValueError("interval must satisfy lo < hi")
    lengths = np.asarray(system.lengths)
    M = system.matrix_array()
    couplings = np.asarray(system.couplings)
    primes = [dominating_child(system, j) for j in range(system.size)]

    angles, im_h, abs_gamma, dirichlet, c_i, c_i_prime = [], [], [], [], [], []
    for lam in np.linspace(lo, hi, n_lam):
        for eta in etas:
            z = complex(lam, eta)
            k = np.sqrt(z)
            r_plus = BoundaryRule.cone(system, z).values
            sin = np.sin(k * lengths)
            S, C = sin / k, np.cos(k * lengths)
            Z = (C + r_plus * S) * sin
            arg = np.abs(np.angle(Z))
            angles.append(np.min(np.minimum(arg, np.pi - arg)))
            im_h.append(np.min((r_plus / k).imag))
            abs_gamma.append(np.max(np.abs((M @ r_plus - couplings) / k)))
            dirichlet.extend(abs(sin[j] * sin[c]) for j, c in enumerate(primes) if c is not None)
            c_i.append(abs(k) * np.cosh(abs(k.imag)))
            c_i_prime.append(1.0 / abs(k))

    theta0 = float(min(angles)) / 10.0
    s0, s1 = float(min(im_h)), float(max(abs_gamma))
    eps_d = float(min(dirichlet)) if dirichlet else float("nan")
    ci, cip = float(max(c_i)), float(max(c_i_prime))
    ratio = theta0 / (1 + theta0)
    eps_star = min(
        ratio * s0 / cip,
        ratio * eps_d / (4 * ci * s1),
        ratio * eps_d * s0 / (2 * ci * (1 + s1**2)),
    )
    m_const = max(cip, 2 * ci * (1 + s1**2) / eps_d)
    constants = StabilityConstants(
        theta0=theta0,
        varsigma0=s0,
        varsigma1=s1,
        eps_d=eps_d,
        c_i=ci,
        c_i_prime=cip,
        eps_star=float(eps_star),
        m_const=float(m_const),
    )
    logger.info(f"Diagnostic constants on [{lo:g}, {hi:g}]: theta0={theta0:.3e}, eps_star={eps_star:.3e}")
    return constants

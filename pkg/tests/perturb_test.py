import numpy as np
import pytest
from scipy.stats import beta as beta_distribution
from scipy.stats import kstest, uniform

from src.common.errors import DirichletProximityError
from src.common.models import ConeSystem, EnsembleConfig, PotentialSpec
from src.cone.solver import solve_cone_system
from src.graph.core import build_universal_cover_system
from src.graph.tree import expand_truncated_tree
from src.perturb.contraction import (
    TwoStepSet,
    contraction_diagnostics,
    disc_scaling_check,
    expansion_inequality_check,
    label_permutations,
    sample_kappa,
    shift_bound_check,
)
from src.perturb.ensemble import path_keys, sample_random_tree, splitmix64, uniform_variates
from src.perturb.lab import (
    bootstrap_interval,
    collect_samples,
    f_distribution,
    gamma_statistics,
    inverse_moments,
    moment_row,
    sigma_ac_membership,
    stability_constants,
    two_step_samples,
    zeta_distribution,
)


@pytest.fixture
def batch(binary_tree):
    return collect_samples(binary_tree, EnsembleConfig(eps=0.1, seed=5), 5 + 0.1j, depth=5, n_samples=40)


def test_splitmix64_known_value():
    assert int(splitmix64(0)) == 0xE220A8397B1DCDAF


def test_path_keys_survive_deepening(binary_tree):
    shallow = expand_truncated_tree(binary_tree, 2)
    deep = expand_truncated_tree(binary_tree, 5)
    np.testing.assert_array_equal(path_keys(deep)[: shallow.size], path_keys(shallow))
    assert len(np.unique(path_keys(deep))) == deep.size


def test_uniform_variates_pass_ks():
    u = uniform_variates(np.arange(10_000, dtype=np.uint64), seed=3, sample=0, stream=0)
    assert np.all((u >= 0) & (u < 1))
    assert kstest(u, "uniform").pvalue > 1e-3


def test_random_tree_is_deterministic(binary_tree):
    config = EnsembleConfig(eps=0.2, seed=7)
    a = sample_random_tree(binary_tree, config, 4, sample=3)
    b = sample_random_tree(binary_tree, config, 4, sample=3)
    c = sample_random_tree(binary_tree, config, 4, sample=4)
    np.testing.assert_array_equal(a.length, b.length)
    assert a.origin_alpha == b.origin_alpha
    assert not np.array_equal(a.length, c.length)


def test_random_tree_bounds(binary_tree):
    tree = sample_random_tree(binary_tree, EnsembleConfig(eps=0.2, seed=1), 5)
    assert np.all((tree.length >= 0.8) & (tree.length <= 1.2))
    assert np.all((tree.alpha >= 0.0) & (tree.alpha <= 0.2))


def test_shallow_draws_do_not_depend_on_depth(binary_tree):
    config = EnsembleConfig(eps=0.1, seed=2)
    shallow = sample_random_tree(binary_tree, config, 2, sample=9)
    deep = sample_random_tree(binary_tree, config, 5, sample=9)
    np.testing.assert_array_equal(deep.length[: shallow.size], shallow.length)
    np.testing.assert_array_equal(deep.alpha[: shallow.size], shallow.alpha)


def test_zero_eps_returns_base(binary_tree):
    base = expand_truncated_tree(binary_tree, 3)
    assert sample_random_tree(binary_tree, EnsembleConfig(eps=0.0), 3, base=base) is base


def test_two_point_and_beta_families(binary_tree):
    two_point = sample_random_tree(binary_tree, EnsembleConfig(eps=0.1, family="two_point", seed=4), 4)
    assert np.all(np.isclose(two_point.length, 0.9) | np.isclose(two_point.length, 1.1))
    beta = sample_random_tree(binary_tree, EnsembleConfig(eps=0.1, family="beta", beta=2.0, seed=4), 4)
    assert np.all((beta.length >= 0.9) & (beta.length <= 1.1))


def test_check_ensemble_errors(binary_tree):
    with pytest.raises(ValueError):
        sample_random_tree(binary_tree, EnsembleConfig(eps=1.0), 3)
    with_potential = ConeSystem.regular(2, potential=PotentialSpec.constant(1.0))
    with pytest.raises(ValueError):
        sample_random_tree(with_potential, EnsembleConfig(eps=0.1), 3)


def test_zero_eps_gives_zero_gamma(binary_tree):
    batch = collect_samples(binary_tree, EnsembleConfig(eps=0.0), 5 + 0.1j, depth=4, n_samples=5)
    assert np.max(batch.gamma) < 1e-12


def test_collect_samples_rejects_bad_input(binary_tree):
    config = EnsembleConfig(eps=0.1)
    with pytest.raises(ValueError):
        collect_samples(binary_tree, config, 5.0, depth=4, n_samples=5)
    with pytest.raises(DirichletProximityError):
        collect_samples(binary_tree, config, complex(np.pi**2, 0.1), depth=4, n_samples=5)


def test_collect_samples_ignores_chunking(binary_tree):
    config = EnsembleConfig(eps=0.1, seed=3)
    a = collect_samples(binary_tree, config, 4 + 0.2j, depth=4, n_samples=12, chunk_size=5)
    b = collect_samples(binary_tree, config, 4 + 0.2j, depth=4, n_samples=12, chunk_size=64)
    np.testing.assert_array_equal(a.r_plus, b.r_plus)
    np.testing.assert_array_equal(a.zeta, b.zeta)


def test_gamma_statistics_checks(binary_tree, batch):
    stats = gamma_statistics(binary_tree, batch.config, batch.z, batch=batch)
    assert stats.n_samples == 40
    assert stats.max_gamma_moment > 0
    assert stats.cauchy_schwarz_slack >= -1e-12
    assert stats.euclidean_violations == 0
    assert stats.vertex_relation_residual < 1e-8
    assert stats.gamma_disc_residual < 1e-8
    assert stats.perron_weighted == pytest.approx(stats.labels[0].mean_gamma)


def test_bootstrap_interval_brackets_mean():
    values = np.random.default_rng(0).normal(loc=2.0, size=400)
    lo, hi = bootstrap_interval(values, n_boot=500, seed=1)
    assert lo < values.mean() < hi
    assert bootstrap_interval(values, n_boot=500, seed=1) == (lo, hi)
    assert np.isnan(bootstrap_interval(np.array([]))[0])


def test_moment_row_chain(batch):
    row = moment_row(batch, s=2.0, p=2.0, n_boot=200, seed=0)
    assert row.ci_low <= row.inverse_moment <= row.ci_high
    assert row.chain_holds


def test_distributions_are_monotone(binary_tree, batch):
    assert zeta_distribution(batch, np.linspace(0.0, 1.0, 11)).monotone
    tail = f_distribution(binary_tree, batch.config, batch.z, np.geomspace(1e-3, 10, 12), batch=batch)
    assert tail.distribution.monotone
    assert tail.F[-1] == pytest.approx(1.0)
    assert tail.recursion_constant >= 0
    with pytest.raises(ValueError):
        f_distribution(binary_tree, batch.config, batch.z, [1.0, 0.5], batch=batch)


def test_sigma_ac_membership(batch):
    report = sigma_ac_membership(batch, 1e-3)
    assert report.member
    with pytest.raises(ValueError):
        sigma_ac_membership(batch, 0.0)


def test_stability_constants(binary_tree):
    constants = stability_constants(binary_tree, (3.0, 5.0), n_lam=5, etas=(0.25, 0.5, 1.0))
    assert constants.theta0 > 0
    assert constants.varsigma0 > 0
    assert constants.eps_star > 0
    assert constants.radius(0.0) == 0.0
    assert constants.radius(1e6) == float("inf")


def test_explicit_bounds_hold():
    assert disc_scaling_check(n=2000, seed=1).passed
    assert shift_bound_check(n=2000, seed=1).passed


def test_label_permutations():
    perms = label_permutations(np.array([0, 0, 1]))
    assert len(perms) == 2
    assert all(p[2] == 2 for p in perms)
    sampled = label_permutations(np.zeros(9, dtype=int), limit=10)
    assert len(sampled) == 10
    np.testing.assert_array_equal(sampled[0], np.arange(9))


def test_two_step_set(binary_tree):
    step = TwoStepSet.from_system(binary_tree, 0)
    assert step.first.tolist() == [0, 0]
    assert step.prime_label == 0
    assert len(step.combined) == 3


def test_kappa_is_nan_at_the_reference(binary_tree):
    z = 5 + 0.1j
    step = TwoStepSet.from_system(binary_tree, 0)
    H_first, H_second = step.reference(solve_cone_system(binary_tree, z))
    report = contraction_diagnostics(step, H_first, H_second, H_first, H_second, z, 0.0, 1.0)
    assert np.isnan(report.kappa)
    with pytest.raises(ValueError):
        contraction_diagnostics(step, -H_first, H_second, H_first, H_second, z, 0.0, 1.0)


def test_kappa_survey_stays_below_one(binary_tree):
    z = 5 + 0.1j
    step = TwoStepSet.from_system(binary_tree, 0)
    H_first, H_second = step.reference(solve_cone_system(binary_tree, z))
    survey = sample_kappa(step, H_first, H_second, z, 0.0, 1.0, eps=0.1, radius=0.01, n_draws=100, seed=2)
    assert survey.n_accepted > 0
    assert survey.max_kappa <= 1 + 1e-12


def test_expansion_inequality(binary_tree, batch):
    samples = two_step_samples(batch, binary_tree)
    assert len(samples) == batch.n_samples
    report = expansion_inequality_check(samples, n_random=2000, seed=3)
    assert report.fitted_constant >= 0
    assert report.min_slack >= -1e-9
    assert all(bound.passed for bound in report.bounds)


def test_inverse_moments_over_energies(binary_tree):
    config = EnsembleConfig(eps=0.05, seed=6)
    result = inverse_moments(binary_tree, config, [5 + 0.1j, 5 + 0.05j], depth=4, n_samples=10, n_boot=50)
    assert len(result.rows) == 2
    assert np.isfinite(result.supremum)
    with pytest.raises(ValueError):
        inverse_moments(binary_tree, config, [])


def test_gamma_moment_shrinks_with_eps(binary_tree):
    z = 5 + 0.05j
    moments = {
        eps: gamma_statistics(binary_tree, EnsembleConfig(eps=eps, seed=11), z, depth=6, n_samples=60).max_gamma_moment
        for eps in (0.08, 0.02, 0.0)
    }
    assert moments[0.02] < moments[0.08]
    assert moments[0.0] < 1e-8
    assert moments[0.0] < moments[0.02]


def _unit_draws(tree, base, eps):
    """Draws mapped back to [0, 1] through each vertex's nominal interval."""
    t_length = (tree.length - (base.length - eps)) / (2 * eps)
    lo = np.maximum(0.0, base.alpha - eps)
    t_alpha = (tree.alpha - lo) / (base.alpha + eps - lo)
    return t_length, t_alpha


def test_uniform_marginals_pass_ks(binary_tree):
    eps = 0.2
    base = expand_truncated_tree(binary_tree, 13)
    assert base.size > 10_000
    tree = sample_random_tree(binary_tree, EnsembleConfig(eps=eps, seed=8), 13, base=base)
    assert kstest(tree.length, uniform(loc=1 - eps, scale=2 * eps).cdf).pvalue > 1e-3
    assert kstest(tree.alpha, uniform(loc=0.0, scale=eps).cdf).pvalue > 1e-3


def test_beta_and_two_point_marginals(binary_tree):
    eps = 0.1
    base = expand_truncated_tree(binary_tree, 13)
    config = EnsembleConfig(eps=eps, family="beta", beta=2.0, seed=8)
    tree = sample_random_tree(binary_tree, config, 13, base=base)
    shape = beta_distribution(2.0, 2.0, loc=1 - eps, scale=2 * eps)
    assert kstest(tree.length, shape.cdf).pvalue > 1e-3

    tree = sample_random_tree(binary_tree, EnsembleConfig(eps=eps, family="two_point", seed=8), 13, base=base)
    high = np.isclose(tree.length, 1 + eps)
    assert np.all(high | np.isclose(tree.length, 1 - eps))
    assert high.mean() == pytest.approx(0.5, abs=0.02)


def test_marginals_per_label(kite):
    system = build_universal_cover_system(kite)
    eps = 0.2
    base = expand_truncated_tree(system, 16)
    tree = sample_random_tree(system, EnsembleConfig(eps=eps, seed=9), 16, base=base)
    t_length, t_alpha = _unit_draws(tree, base, eps)
    tested = 0
    for label in np.unique(base.label):
        nodes = base.label == label
        if nodes.sum() < 200:
            continue
        assert kstest(t_length[nodes], "uniform").pvalue > 1e-4
        assert kstest(t_alpha[nodes], "uniform").pvalue > 1e-4
        tested += 1
    assert tested >= 2

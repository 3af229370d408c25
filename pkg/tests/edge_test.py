import numpy as np
import pytest

from src.common.errors import DirichletProximityError, IntegrationError
from src.common.models import ConeSystem, PotentialSpec
from src.edge.solutions import (
    ComplexEnergy,
    dirichlet_distance,
    dirichlet_spectrum,
    edge_profile,
    fundamental_solution,
    guard_real_energy,
    monodromy_batch,
    thickened_dirichlet,
)


def test_free_edge_is_trigonometric():
    z = 3.0 + 0.5j
    k = np.sqrt(z)
    sol = fundamental_solution(PotentialSpec(), 1.3, z)
    assert sol.C == pytest.approx(np.cos(k * 1.3))
    assert sol.S == pytest.approx(np.sin(k * 1.3) / k)
    assert sol.wronskian() == pytest.approx(1.0)


def test_constant_potential_shifts_energy():
    shifted = fundamental_solution(PotentialSpec.constant(2.0), 1.0, 5.0)
    free = fundamental_solution(PotentialSpec(), 1.0, 3.0)
    assert shifted.C == pytest.approx(free.C)
    assert shifted.Sp == pytest.approx(free.Sp)


def test_sampled_constant_matches_closed_form():
    z = 5.0 + 1.0j
    sampled = fundamental_solution(PotentialSpec.sampled([2.0, 2.0, 2.0]), 1.0, z)
    closed = fundamental_solution(PotentialSpec.constant(2.0), 1.0, z)
    for a, b in zip(sampled.as_row(), closed.as_row()):
        assert a == pytest.approx(b, abs=1e-8)


def test_wronskian_with_cosine_potential():
    sol = fundamental_solution(PotentialSpec.cosine(1.0, 3.0), 0.8, 7.0 + 0.2j)
    assert abs(sol.wronskian() - 1.0) < 1e-9


def test_reversed_edge_monodromy():
    potential = PotentialSpec.sampled([0.0, 1.0, 3.0])
    z = 4.0 + 0.3j
    forward = fundamental_solution(potential, 1.2, z).reversed()
    backward = fundamental_solution(potential.reversed(), 1.2, z)
    for a, b in zip(forward.as_row(), backward.as_row()):
        assert a == pytest.approx(b, abs=1e-8)


def test_profile_end_matches_monodromy():
    potential = PotentialSpec.cosine(0.5, 1.0)
    prof = edge_profile(potential, 1.0, 2.0 + 1j, [0.0, 0.5, 1.0])
    end = fundamental_solution(potential, 1.0, 2.0 + 1j)
    assert prof.C[0] == pytest.approx(1.0)
    assert prof.S[0] == pytest.approx(0.0, abs=1e-14)
    assert prof.C[-1] == pytest.approx(end.C, abs=1e-8)
    with pytest.raises(ValueError):
        edge_profile(potential, 1.0, 2.0, [1.5])


def test_monodromy_batch_mixes_kinds():
    potentials = [PotentialSpec(), PotentialSpec.sampled([0.0, 1.0])]
    batch = monodromy_batch(potentials, [0, 1, 0], [1.0, 1.0, 2.0], 3.0 + 1j)
    single = fundamental_solution(potentials[1], 1.0, 3.0 + 1j)
    assert batch.S[1] == pytest.approx(single.S)
    assert batch.C[2] == pytest.approx(np.cos(np.sqrt(3.0 + 1j) * 2.0))


def test_dirichlet_spectrum_of_unit_edge():
    spectrum = dirichlet_spectrum([1.0], 40.0)
    np.testing.assert_allclose(spectrum.merged, [np.pi**2, 4 * np.pi**2])


def test_dirichlet_spectrum_numeric_potential():
    spectrum = dirichlet_spectrum([1.0], 12.0, potentials=[PotentialSpec.sampled([1.0, 1.0])])
    np.testing.assert_allclose(spectrum.merged, [np.pi**2 + 1.0], atol=1e-7)


def test_thickened_dirichlet(binary_tree):
    intervals = thickened_dirichlet(binary_tree, 0.1, 20.0)
    lo, hi = intervals[0]
    assert lo == pytest.approx(np.pi**2 / 1.1**2)
    assert hi == pytest.approx(np.pi**2 / 0.9**2)
    assert thickened_dirichlet(binary_tree, 0.0, 20.0)[0][0] == pytest.approx(np.pi**2)
    with pytest.raises(ValueError):
        thickened_dirichlet(binary_tree, 1.0, 20.0)


def test_dirichlet_guard(binary_tree):
    with pytest.raises(DirichletProximityError):
        guard_real_energy(binary_tree, np.pi**2)
    guard_real_energy(binary_tree, 5.0)
    guard_real_energy(binary_tree, complex(np.pi**2, 0.1))
    assert dirichlet_distance(PotentialSpec(), 1.0, 10.0) == pytest.approx(10.0 - np.pi**2)


def test_complex_energy_parse():
    energy = ComplexEnergy.parse("3+0.5i")
    assert (energy.lam, energy.eta) == (3.0, 0.5)
    assert ComplexEnergy.parse("2").eta == 0.0
    with pytest.raises(ValueError):
        ComplexEnergy.parse("2-1i")
    with pytest.raises(ValueError):
        ComplexEnergy.parse("three")


def test_wronskian_over_energy_grid():
    rng = np.random.default_rng(0)
    zs = rng.uniform(-10, 50, size=200) + 1j * rng.uniform(0, 1, size=200)
    cases = [(PotentialSpec(), zs), (PotentialSpec.constant(1.5), zs), (PotentialSpec.cosine(0.7, 2.0), zs[:40])]
    for potential, energies in cases:
        for z in energies:
            assert abs(fundamental_solution(potential, 1.3, z).wronskian() - 1.0) < 1e-10


def test_loose_tolerance_raises_with_residual():
    potential = PotentialSpec.cosine(1.0, 3.0)
    with pytest.raises(IntegrationError) as excinfo:
        fundamental_solution(potential, 1.3, 20 + 0.5j, rtol=1e-5, atol=1e-7, method="RK23")
    assert excinfo.value.residual > 1e-10


def test_growing_solutions_keep_raw_wronskian():
    potential = PotentialSpec.cosine(1.0, 3.0)
    for z in (-10 + 0.0j, -10 + 1.0j, 20 + 0.5j, 50 + 0.1j):
        m = fundamental_solution(potential, 1.3, z)
        assert abs(m.wronskian() - 1.0) < 1e-10
        tight = fundamental_solution(potential, 1.3, z, rtol=1e-13, atol=1e-14)
        assert m.C == pytest.approx(tight.C, rel=1e-8)
        assert m.S == pytest.approx(tight.S, rel=1e-8)

import numpy as np
import pytest
from pydantic import ValidationError

from src.common.hyperbolic import (
    cayley,
    disc_delta,
    euclidean_bound,
    gamma,
    inverse_cayley,
    mobius,
    shift_bound_constant,
)
from src.common.models import ConeSystem, EnsembleConfig, PotentialSpec
from src.common.parallel import chunk_bounds, map_chunks
from src.common.settings import Settings


def _span(start: int, stop: int) -> list[int]:
    return list(range(start, stop))


def test_gamma_values():
    assert gamma(1j, 1j) == 0.0
    assert float(gamma(2j, 1j)) == pytest.approx(0.5)
    assert float(gamma(1 + 1j, 2j)) == pytest.approx(float(gamma(2j, 1 + 1j)))


def test_gamma_is_twice_disc_delta():
    g = np.array([2j, 1 + 0.5j, -3 + 4j])
    h = np.array([1j, 0.2 + 2j, 1 + 1j])
    np.testing.assert_allclose(gamma(g, h), 2 * disc_delta(cayley(g), cayley(h)), rtol=1e-12)


def test_cayley_maps_upper_half_plane_to_disc():
    z = np.array([1j, 3 + 0.1j, -2 + 5j])
    w = cayley(z)
    assert cayley(1j) == 0
    assert np.all(np.abs(w) < 1)
    np.testing.assert_allclose(inverse_cayley(w), z, rtol=1e-12)


def test_mobius_at_infinity():
    assert complex(mobius(2.0, 1.0, 4.0, 3.0, np.inf)) == pytest.approx(0.5)
    assert complex(mobius(2.0, 1.0, 4.0, 3.0, 1.0)) == pytest.approx(3.0 / 7.0)
    assert not np.isfinite(mobius(1.0, 0.0, 1.0, -1.0, 1.0))


def test_shift_bound_constant():
    assert shift_bound_constant(2j, 1.0) == pytest.approx(4 * 1 / 2 + 4 * 1 / 4)
    assert shift_bound_constant(1j, 0.0) == 0.0


def test_euclidean_bound_holds():
    rng = np.random.default_rng(1)
    xi = rng.normal(size=200) + 1j * np.exp(rng.normal(size=200))
    zeta = rng.normal(size=200) + 1j * np.exp(rng.normal(size=200))
    assert np.all(np.abs(xi) <= euclidean_bound(xi, zeta) * (1 + 1e-12))


def test_settings_from_env(monkeypatch):
    monkeypatch.setenv("QTREE_WORKERS", "3")
    monkeypatch.setenv("QTREE_LOG_LEVEL", "debug")
    settings = Settings.from_env()
    assert settings.workers == 3
    assert settings.log_level == "DEBUG"
    assert settings.dirichlet_guard == 1e-6


def test_settings_rejects_bad_values(monkeypatch):
    monkeypatch.setenv("QTREE_WORKERS", "many")
    with pytest.raises(ValueError):
        Settings.from_env()
    monkeypatch.setenv("QTREE_WORKERS", "0")
    with pytest.raises(ValidationError):
        Settings.from_env()


def test_potential_validation():
    with pytest.raises(ValidationError):
        PotentialSpec.sampled([1.0])
    with pytest.raises(ValidationError):
        PotentialSpec.sampled([0.0, 1.0, 2.0], symmetric=True)
    assert PotentialSpec.cosine(1.0, 0.5).min_value() == pytest.approx(0.5)
    assert PotentialSpec.sampled([0.0, 1.0, 3.0]).reversed().values == (3.0, 1.0, 0.0)


def test_cone_system_validation():
    with pytest.raises(ValidationError):
        ConeSystem(matrix=[[1, 1]], lengths=[1.0], potentials=[PotentialSpec()], couplings=[0.0])
    with pytest.raises(ValidationError):
        ConeSystem(matrix=[[2]], lengths=[0.0], potentials=[PotentialSpec()], couplings=[0.0])
    system = ConeSystem.regular(3, length=0.5, alpha=1.0)
    assert system.size == 1
    assert system.row_sums().tolist() == [3]
    assert system.backward_label(0) == 0


def test_ensemble_config_bounds():
    with pytest.raises(ValidationError):
        EnsembleConfig(eps=-0.1)
    with pytest.raises(ValidationError):
        EnsembleConfig(family="gaussian")


def test_chunk_bounds():
    assert chunk_bounds(10, 4) == [(0, 4), (4, 8), (8, 10)]
    assert chunk_bounds(0, 4) == []
    with pytest.raises(ValueError):
        chunk_bounds(5, 0)


def test_map_chunks_keeps_order():
    chunks = map_chunks(_span, 10, workers=1, chunk_size=3)
    assert sum(chunks, []) == list(range(10))
